#include "sdfscore/score_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <sstream>

namespace sdfscore {

namespace {

template <typename T>
inline T silu(T x) {
    T s = T(1) / (T(1) + std::exp(-x));
    return x * s;
}

template <typename T>
inline T silu_grad(T x) {
    T s = T(1) / (T(1) + std::exp(-x));
    return s * (T(1) + x * (T(1) - s));
}

// ---- 3x3 convolution, zero padding 1, stride 1 or 2 ------------------------
// Lowered to im2col + a register-blocked GEMM so all three passes (forward,
// input gradient, weight gradient) run on one microkernel.

template <typename T>
std::vector<T>& scratch_buffer(int which) {
    static thread_local std::vector<T> bufs[3];
    return bufs[which];
}

// C[M][N] = (or +=) A[M][K] * B[K][N], all row-major.
template <typename T>
void gemm(const T* A, const T* B, T* C, int M, int K, int N, bool accumulate) {
    constexpr int MR = 4, NR = 16;
    for (int i0 = 0; i0 < M; i0 += MR) {
        const int mb = std::min(MR, M - i0);
        for (int j0 = 0; j0 < N; j0 += NR) {
            const int nb = std::min(NR, N - j0);
            if (nb == NR) {
                T acc[MR][NR];
                for (int r = 0; r < mb; r++) {
                    if (accumulate) {
                        const T* cp = C + size_t(i0 + r) * N + j0;
                        for (int v = 0; v < NR; v++) acc[r][v] = cp[v];
                    } else {
                        for (int v = 0; v < NR; v++) acc[r][v] = T(0);
                    }
                }
                for (int k = 0; k < K; k++) {
                    const T* bp = B + size_t(k) * N + j0;
                    for (int r = 0; r < mb; r++) {
                        const T a = A[size_t(i0 + r) * K + k];
#pragma omp simd
                        for (int v = 0; v < NR; v++) acc[r][v] += a * bp[v];
                    }
                }
                for (int r = 0; r < mb; r++) {
                    T* cp = C + size_t(i0 + r) * N + j0;
                    for (int v = 0; v < NR; v++) cp[v] = acc[r][v];
                }
            } else {
                for (int i = i0; i < i0 + mb; i++) {
                    for (int j = j0; j < j0 + nb; j++) {
                        T acc = accumulate ? C[size_t(i) * N + j] : T(0);
                        for (int k = 0; k < K; k++) acc += A[size_t(i) * K + k] * B[size_t(k) * N + j];
                        C[size_t(i) * N + j] = acc;
                    }
                }
            }
        }
    }
}

// col[(ic*9 + ky*3 + kx)][oy*ow + ox] = in[ic][oy*stride + ky - 1][ox*stride + kx - 1]
template <typename T>
void im2col3x3(const T* in, int ci, int h, int w, int stride, T* col, int oh, int ow) {
    const size_t N = size_t(oh) * ow;
    for (int ic = 0; ic < ci; ic++) {
        const T* ip0 = in + size_t(ic) * h * w;
        for (int ky = 0; ky < 3; ky++) {
            for (int kx = 0; kx < 3; kx++) {
                T* dst = col + (size_t(ic) * 9 + ky * 3 + kx) * N;
                const int ox_lo = (kx == 0) ? 1 : 0;
                const int ox_hi = std::min(ow - 1, (w - kx) / stride);
                for (int oy = 0; oy < oh; oy++) {
                    T* row = dst + size_t(oy) * ow;
                    const int iy = oy * stride + ky - 1;
                    if (iy < 0 || iy >= h) {
                        std::fill(row, row + ow, T(0));
                        continue;
                    }
                    const T* ip = ip0 + size_t(iy) * w + (kx - 1);
                    for (int ox = 0; ox < ox_lo; ox++) row[ox] = T(0);
                    if (stride == 1) {
                        for (int ox = ox_lo; ox <= ox_hi; ox++) row[ox] = ip[ox];
                    } else {
                        for (int ox = ox_lo; ox <= ox_hi; ox++) row[ox] = ip[size_t(ox) * stride];
                    }
                    for (int ox = ox_hi + 1; ox < ow; ox++) row[ox] = T(0);
                }
            }
        }
    }
}

// scatter-add of a column-format gradient back onto the input grid
template <typename T>
void col2im3x3_add(const T* col, int ci, int h, int w, int stride, T* gin, int oh, int ow) {
    const size_t N = size_t(oh) * ow;
    for (int ic = 0; ic < ci; ic++) {
        T* gp0 = gin + size_t(ic) * h * w;
        for (int ky = 0; ky < 3; ky++) {
            for (int kx = 0; kx < 3; kx++) {
                const T* src = col + (size_t(ic) * 9 + ky * 3 + kx) * N;
                const int ox_lo = (kx == 0) ? 1 : 0;
                const int ox_hi = std::min(ow - 1, (w - kx) / stride);
                for (int oy = 0; oy < oh; oy++) {
                    const int iy = oy * stride + ky - 1;
                    if (iy < 0 || iy >= h) continue;
                    const T* row = src + size_t(oy) * ow;
                    T* gp = gp0 + size_t(iy) * w + (kx - 1);
                    if (stride == 1) {
                        for (int ox = ox_lo; ox <= ox_hi; ox++) gp[ox] += row[ox];
                    } else {
                        for (int ox = ox_lo; ox <= ox_hi; ox++) gp[size_t(ox) * stride] += row[ox];
                    }
                }
            }
        }
    }
}

template <typename T>
void transpose(const T* src, int rows, int cols, T* dst) {
    for (int r = 0; r < rows; r++)
        for (int c = 0; c < cols; c++) dst[size_t(c) * rows + r] = src[size_t(r) * cols + c];
}

template <typename T>
void conv3x3_forward(const T* in, int ci, int h, int w, const T* wgt, const T* bias, int co,
                     int stride, T* out, int oh, int ow) {
    const int K = ci * 9;
    const size_t N = size_t(oh) * ow;
    std::vector<T>& col = scratch_buffer<T>(0);
    col.resize(size_t(K) * N);
    im2col3x3(in, ci, h, w, stride, col.data(), oh, ow);
    for (int oc = 0; oc < co; oc++) std::fill(out + size_t(oc) * N, out + size_t(oc + 1) * N, bias[oc]);
    gemm(wgt, col.data(), out, co, K, int(N), true);
}

// gin must be zeroed by the caller; gradients are added.
template <typename T>
void conv3x3_backward_input(const T* gout, int co, int oh, int ow, const T* wgt, int ci, int stride,
                            T* gin, int h, int w) {
    const int K = ci * 9;
    const size_t N = size_t(oh) * ow;
    std::vector<T>& wt = scratch_buffer<T>(1);
    wt.resize(size_t(K) * co);
    transpose(wgt, co, K, wt.data());
    std::vector<T>& gcol = scratch_buffer<T>(0);
    gcol.resize(size_t(K) * N);
    gemm(wt.data(), gout, gcol.data(), K, co, int(N), false);
    col2im3x3_add(gcol.data(), ci, h, w, stride, gin, oh, ow);
}

template <typename T>
void conv3x3_backward_params(const T* in, int ci, int h, int w, const T* gout, int co, int oh,
                             int ow, int stride, T* gwgt, T* gbias) {
    const int K = ci * 9;
    const size_t N = size_t(oh) * ow;
    for (int oc = 0; oc < co; oc++) {
        const T* op = gout + size_t(oc) * N;
        T bsum = T(0);
#pragma omp simd reduction(+ : bsum)
        for (size_t i = 0; i < N; i++) bsum += op[i];
        gbias[oc] += bsum;
    }
    std::vector<T>& col = scratch_buffer<T>(0);
    col.resize(size_t(K) * N);
    im2col3x3(in, ci, h, w, stride, col.data(), oh, ow);
    std::vector<T>& colT = scratch_buffer<T>(2);
    colT.resize(size_t(K) * N);
    transpose(col.data(), K, int(N), colT.data());
    gemm(gout, colT.data(), gwgt, co, int(N), K, true);
}

// ---- parameter layout -------------------------------------------------------

struct Layout {
    // conv tensors: {out_ch, in_ch}; dense tensors: {out_dim, in_dim}
    struct Entry {
        const char* name;
        size_t w_count;
        size_t b_count;
    };
    std::vector<Entry> entries;
    std::vector<size_t> offsets;  // per entry: weight offset (bias follows weights)
    size_t total = 0;

    explicit Layout(const ScoreModelArch& a) {
        const size_t C = a.base_channels, C2 = 2 * C, C3 = 3 * C;
        const size_t E = a.embed_hidden, F2 = 2 * size_t(a.embed_freqs);
        entries = {
            {"stem", C * 2 * 9, C},     {"res_a1", C * C * 9, C},    {"res_a2", C * C * 9, C},
            {"down", C2 * C * 9, C2},   {"res_b1", C2 * C2 * 9, C2}, {"res_b2", C2 * C2 * 9, C2},
            {"fuse", C * C3 * 9, C},    {"res_c1", C * C * 9, C},    {"res_c2", C * C * 9, C},
            {"head", 1 * C * 9, 1},     {"emb_lin", E * F2, E},      {"emb_mod_a", C2 * E, C2},
            {"emb_mod_b", 2 * C2 * E, 2 * C2}, {"emb_mod_c", C2 * E, C2},
        };
        offsets.resize(entries.size());
        size_t off = 0;
        for (size_t i = 0; i < entries.size(); i++) {
            offsets[i] = off;
            off += entries[i].w_count + entries[i].b_count;
        }
        total = off;
    }
};

template <typename T>
struct ParamView {
    const T *stem_w, *stem_b, *a1_w, *a1_b, *a2_w, *a2_b, *down_w, *down_b, *b1_w, *b1_b, *b2_w,
        *b2_b, *fuse_w, *fuse_b, *c1_w, *c1_b, *c2_w, *c2_b, *head_w, *head_b, *e1_w, *e1_b, *ea_w,
        *ea_b, *eb_w, *eb_b, *ec_w, *ec_b;

    ParamView(const T* p, const Layout& L) {
        const T* ptr[14][2];
        for (size_t i = 0; i < 14; i++) {
            ptr[i][0] = p + L.offsets[i];
            ptr[i][1] = p + L.offsets[i] + L.entries[i].w_count;
        }
        stem_w = ptr[0][0]; stem_b = ptr[0][1];
        a1_w = ptr[1][0];   a1_b = ptr[1][1];
        a2_w = ptr[2][0];   a2_b = ptr[2][1];
        down_w = ptr[3][0]; down_b = ptr[3][1];
        b1_w = ptr[4][0];   b1_b = ptr[4][1];
        b2_w = ptr[5][0];   b2_b = ptr[5][1];
        fuse_w = ptr[6][0]; fuse_b = ptr[6][1];
        c1_w = ptr[7][0];   c1_b = ptr[7][1];
        c2_w = ptr[8][0];   c2_b = ptr[8][1];
        head_w = ptr[9][0]; head_b = ptr[9][1];
        e1_w = ptr[10][0];  e1_b = ptr[10][1];
        ea_w = ptr[11][0];  ea_b = ptr[11][1];
        eb_w = ptr[12][0];  eb_b = ptr[12][1];
        ec_w = ptr[13][0];  ec_b = ptr[13][1];
    }
};

template <typename T>
using MutParamView = ParamView<T>;  // gradients use the same carving applied to a mutable buffer

template <typename T>
struct Tape {
    int C, C2, C3, E, F2;
    int h, w, h2, w2;
    std::vector<T> in2, h0, a_pre1, a_c1, a_pre2, r1, m1;
    std::vector<T> d_pre, h1, b_pre1, b_c1, b_pre2, r2, m2;
    std::vector<T> up, f_pre, h2f, c_pre1, c_c1, c_pre2, r3, m3, h_pre, zhat;
    std::vector<T> ff, e_lin, e, mod_a, mod_b, mod_c;

    Tape(const ScoreModelArch& a, int height, int width) {
        C = a.base_channels;
        C2 = 2 * C;
        C3 = 3 * C;
        E = a.embed_hidden;
        F2 = 2 * a.embed_freqs;
        h = height;
        w = width;
        h2 = h / 2;
        w2 = w / 2;
        const size_t hw = size_t(h) * w, hw2 = size_t(h2) * w2;
        in2.resize(2 * hw);
        h0.resize(C * hw);
        a_pre1.resize(C * hw);
        a_c1.resize(C * hw);
        a_pre2.resize(C * hw);
        r1.resize(C * hw);
        m1.resize(C * hw);
        d_pre.resize(C * hw);
        h1.resize(C2 * hw2);
        b_pre1.resize(C2 * hw2);
        b_c1.resize(C2 * hw2);
        b_pre2.resize(C2 * hw2);
        r2.resize(C2 * hw2);
        m2.resize(C2 * hw2);
        up.resize(C2 * hw);
        f_pre.resize(C3 * hw);
        h2f.resize(C * hw);
        c_pre1.resize(C * hw);
        c_c1.resize(C * hw);
        c_pre2.resize(C * hw);
        r3.resize(C * hw);
        m3.resize(C * hw);
        h_pre.resize(C * hw);
        zhat.resize(hw);
        ff.resize(F2);
        e_lin.resize(E);
        e.resize(E);
        mod_a.resize(C2);
        mod_b.resize(2 * C2);
        mod_c.resize(C2);
    }
};

template <typename T>
void dense_forward(const T* wgt, const T* bias, int out_dim, int in_dim, const T* x, T* y) {
    for (int o = 0; o < out_dim; o++) {
        T acc = bias[o];
        const T* row = wgt + size_t(o) * in_dim;
        for (int i = 0; i < in_dim; i++) acc += row[i] * x[i];
        y[o] = acc;
    }
}

template <typename T>
void embed_forward(const ScoreModelArch& a, const ParamView<T>& P, double sigma, Tape<T>& t) {
    const int F = a.embed_freqs;
    const double logs = std::log(sigma);
    const double ratio = a.sigma_max / a.sigma_min;
    for (int j = 0; j < F; j++) {
        double wj = (1.0 / a.sigma_max) * std::pow(ratio, double(j) / (F - 1));
        t.ff[2 * j] = T(std::sin(wj * logs));
        t.ff[2 * j + 1] = T(std::cos(wj * logs));
    }
    dense_forward(P.e1_w, P.e1_b, t.E, t.F2, t.ff.data(), t.e_lin.data());
    for (int i = 0; i < t.E; i++) t.e[i] = silu(t.e_lin[i]);
    dense_forward(P.ea_w, P.ea_b, t.C2, t.E, t.e.data(), t.mod_a.data());
    dense_forward(P.eb_w, P.eb_b, 2 * t.C2, t.E, t.e.data(), t.mod_b.data());
    dense_forward(P.ec_w, P.ec_b, t.C2, t.E, t.e.data(), t.mod_c.data());
}

// m = (1 + scale_c) * r + shift_c, per channel
template <typename T>
void modulate(const T* r, int c, size_t hw, const T* mod, T* m) {
    for (int ch = 0; ch < c; ch++) {
        const T sc = T(1) + mod[ch];
        const T sh = mod[c + ch];
        const T* rp = r + size_t(ch) * hw;
        T* mp = m + size_t(ch) * hw;
        for (size_t i = 0; i < hw; i++) mp[i] = sc * rp[i] + sh;
    }
}

template <typename T>
void silu_map(const std::vector<T>& x, std::vector<T>& y) {
    for (size_t i = 0; i < x.size(); i++) y[i] = silu(x[i]);
}

template <typename T>
void forward_pass(const ScoreModelArch& a, const T* params, const Field& mt, const Field& x,
                  double sigma, Tape<T>& t) {
    const Layout L(a);
    const ParamView<T> P(params, L);
    const size_t hw = size_t(t.h) * t.w, hw2 = size_t(t.h2) * t.w2;

    for (size_t i = 0; i < hw; i++) {
        t.in2[i] = T(mt.values[i]);
        t.in2[hw + i] = T(x.values[i]);
    }
    embed_forward(a, P, sigma, t);

    conv3x3_forward(t.in2.data(), 2, t.h, t.w, P.stem_w, P.stem_b, t.C, 1, t.h0.data(), t.h, t.w);

    // residual block A + modulation
    silu_map(t.h0, t.a_pre1);
    conv3x3_forward(t.a_pre1.data(), t.C, t.h, t.w, P.a1_w, P.a1_b, t.C, 1, t.a_c1.data(), t.h, t.w);
    silu_map(t.a_c1, t.a_pre2);
    conv3x3_forward(t.a_pre2.data(), t.C, t.h, t.w, P.a2_w, P.a2_b, t.C, 1, t.r1.data(), t.h, t.w);
    for (size_t i = 0; i < t.r1.size(); i++) t.r1[i] += t.h0[i];
    modulate(t.r1.data(), t.C, hw, t.mod_a.data(), t.m1.data());

    // descend
    silu_map(t.m1, t.d_pre);
    conv3x3_forward(t.d_pre.data(), t.C, t.h, t.w, P.down_w, P.down_b, t.C2, 2, t.h1.data(), t.h2, t.w2);

    // residual block B + modulation
    silu_map(t.h1, t.b_pre1);
    conv3x3_forward(t.b_pre1.data(), t.C2, t.h2, t.w2, P.b1_w, P.b1_b, t.C2, 1, t.b_c1.data(), t.h2, t.w2);
    silu_map(t.b_c1, t.b_pre2);
    conv3x3_forward(t.b_pre2.data(), t.C2, t.h2, t.w2, P.b2_w, P.b2_b, t.C2, 1, t.r2.data(), t.h2, t.w2);
    for (size_t i = 0; i < t.r2.size(); i++) t.r2[i] += t.h1[i];
    modulate(t.r2.data(), t.C2, hw2, t.mod_b.data(), t.m2.data());

    // ascend: nearest-neighbor x2, skip concat [up, m1], fuse back to C
    for (int c = 0; c < t.C2; c++) {
        const T* ip = t.m2.data() + size_t(c) * hw2;
        T* op = t.up.data() + size_t(c) * hw;
        for (int y = 0; y < t.h; y++)
            for (int xx = 0; xx < t.w; xx++) op[size_t(y) * t.w + xx] = ip[size_t(y / 2) * t.w2 + xx / 2];
    }
    for (size_t i = 0; i < t.up.size(); i++) t.f_pre[i] = silu(t.up[i]);
    for (size_t i = 0; i < t.m1.size(); i++) t.f_pre[t.up.size() + i] = silu(t.m1[i]);
    conv3x3_forward(t.f_pre.data(), t.C3, t.h, t.w, P.fuse_w, P.fuse_b, t.C, 1, t.h2f.data(), t.h, t.w);

    // residual block C + modulation
    silu_map(t.h2f, t.c_pre1);
    conv3x3_forward(t.c_pre1.data(), t.C, t.h, t.w, P.c1_w, P.c1_b, t.C, 1, t.c_c1.data(), t.h, t.w);
    silu_map(t.c_c1, t.c_pre2);
    conv3x3_forward(t.c_pre2.data(), t.C, t.h, t.w, P.c2_w, P.c2_b, t.C, 1, t.r3.data(), t.h, t.w);
    for (size_t i = 0; i < t.r3.size(); i++) t.r3[i] += t.h2f[i];
    modulate(t.r3.data(), t.C, hw, t.mod_c.data(), t.m3.data());

    silu_map(t.m3, t.h_pre);
    conv3x3_forward(t.h_pre.data(), t.C, t.h, t.w, P.head_w, P.head_b, 1, 1, t.zhat.data(), t.h, t.w);
}

// Reverse pass; g_zhat is consumed, parameter gradients accumulate into grad.
void backward_pass(const ScoreModelArch& a, const double* params, const Tape<double>& t,
                   std::vector<double>& g_zhat, double* grad) {
    const Layout L(a);
    const ParamView<double> P(params, L);
    double* gp = grad;
    const MutParamView<double> G_const(gp, L);
    // ParamView stores const pointers; cast back for accumulation
    auto mut = [&](const double* p) { return const_cast<double*>(p); };

    const size_t hw = size_t(t.h) * t.w, hw2 = size_t(t.h2) * t.w2;
    const int C = t.C, C2 = t.C2, C3 = t.C3;

    std::vector<double> g_m3(C * hw, 0.0), g_r3(C * hw, 0.0), g_h2f(C * hw, 0.0);
    std::vector<double> g_mod_c(C2, 0.0), g_mod_b(2 * C2, 0.0), g_mod_a(C2, 0.0);

    // head
    {
        std::vector<double> g_hpre(C * hw, 0.0);
        conv3x3_backward_params(t.h_pre.data(), C, t.h, t.w, g_zhat.data(), 1, t.h, t.w, 1,
                                mut(G_const.head_w), mut(G_const.head_b));
        conv3x3_backward_input(g_zhat.data(), 1, t.h, t.w, P.head_w, C, 1, g_hpre.data(), t.h, t.w);
        for (size_t i = 0; i < g_hpre.size(); i++) g_m3[i] = g_hpre[i] * silu_grad(t.m3[i]);
    }

    // modulation C
    for (int c = 0; c < C; c++) {
        const double sc = 1.0 + t.mod_c[c];
        const double* gm = g_m3.data() + size_t(c) * hw;
        const double* rp = t.r3.data() + size_t(c) * hw;
        double* gr = g_r3.data() + size_t(c) * hw;
        double acc_s = 0.0, acc_b = 0.0;
        for (size_t i = 0; i < hw; i++) {
            gr[i] = gm[i] * sc;
            acc_s += gm[i] * rp[i];
            acc_b += gm[i];
        }
        g_mod_c[c] += acc_s;
        g_mod_c[C + c] += acc_b;
    }

    // residual block C
    {
        std::vector<double> g_cpre2(C * hw, 0.0), g_cc1(C * hw, 0.0), g_cpre1(C * hw, 0.0);
        conv3x3_backward_params(t.c_pre2.data(), C, t.h, t.w, g_r3.data(), C, t.h, t.w, 1,
                                mut(G_const.c2_w), mut(G_const.c2_b));
        conv3x3_backward_input(g_r3.data(), C, t.h, t.w, P.c2_w, C, 1, g_cpre2.data(), t.h, t.w);
        for (size_t i = 0; i < g_cc1.size(); i++) g_cc1[i] = g_cpre2[i] * silu_grad(t.c_c1[i]);
        conv3x3_backward_params(t.c_pre1.data(), C, t.h, t.w, g_cc1.data(), C, t.h, t.w, 1,
                                mut(G_const.c1_w), mut(G_const.c1_b));
        conv3x3_backward_input(g_cc1.data(), C, t.h, t.w, P.c1_w, C, 1, g_cpre1.data(), t.h, t.w);
        for (size_t i = 0; i < g_h2f.size(); i++) g_h2f[i] = g_r3[i] + g_cpre1[i] * silu_grad(t.h2f[i]);
    }

    // fuse and skip concat
    std::vector<double> g_m1(C * hw, 0.0), g_m2(C2 * hw2, 0.0);
    {
        std::vector<double> g_fpre(C3 * hw, 0.0), g_up(C2 * hw, 0.0);
        conv3x3_backward_params(t.f_pre.data(), C3, t.h, t.w, g_h2f.data(), C, t.h, t.w, 1,
                                mut(G_const.fuse_w), mut(G_const.fuse_b));
        conv3x3_backward_input(g_h2f.data(), C, t.h, t.w, P.fuse_w, C3, 1, g_fpre.data(), t.h, t.w);
        for (size_t i = 0; i < g_up.size(); i++) g_up[i] = g_fpre[i] * silu_grad(t.up[i]);
        for (size_t i = 0; i < g_m1.size(); i++)
            g_m1[i] = g_fpre[g_up.size() + i] * silu_grad(t.m1[i]);
        // nearest-neighbor upsample backward: sum each 2x2 block
        for (int c = 0; c < C2; c++) {
            const double* gu = g_up.data() + size_t(c) * hw;
            double* gm = g_m2.data() + size_t(c) * hw2;
            for (int y = 0; y < t.h; y++)
                for (int xx = 0; xx < t.w; xx++)
                    gm[size_t(y / 2) * t.w2 + xx / 2] += gu[size_t(y) * t.w + xx];
        }
    }

    // modulation B
    std::vector<double> g_r2(C2 * hw2, 0.0);
    for (int c = 0; c < C2; c++) {
        const double sc = 1.0 + t.mod_b[c];
        const double* gm = g_m2.data() + size_t(c) * hw2;
        const double* rp = t.r2.data() + size_t(c) * hw2;
        double* gr = g_r2.data() + size_t(c) * hw2;
        double acc_s = 0.0, acc_b = 0.0;
        for (size_t i = 0; i < hw2; i++) {
            gr[i] = gm[i] * sc;
            acc_s += gm[i] * rp[i];
            acc_b += gm[i];
        }
        g_mod_b[c] += acc_s;
        g_mod_b[C2 + c] += acc_b;
    }

    // residual block B
    std::vector<double> g_h1(C2 * hw2, 0.0);
    {
        std::vector<double> g_bpre2(C2 * hw2, 0.0), g_bc1(C2 * hw2, 0.0), g_bpre1(C2 * hw2, 0.0);
        conv3x3_backward_params(t.b_pre2.data(), C2, t.h2, t.w2, g_r2.data(), C2, t.h2, t.w2, 1,
                                mut(G_const.b2_w), mut(G_const.b2_b));
        conv3x3_backward_input(g_r2.data(), C2, t.h2, t.w2, P.b2_w, C2, 1, g_bpre2.data(), t.h2, t.w2);
        for (size_t i = 0; i < g_bc1.size(); i++) g_bc1[i] = g_bpre2[i] * silu_grad(t.b_c1[i]);
        conv3x3_backward_params(t.b_pre1.data(), C2, t.h2, t.w2, g_bc1.data(), C2, t.h2, t.w2, 1,
                                mut(G_const.b1_w), mut(G_const.b1_b));
        conv3x3_backward_input(g_bc1.data(), C2, t.h2, t.w2, P.b1_w, C2, 1, g_bpre1.data(), t.h2, t.w2);
        for (size_t i = 0; i < g_h1.size(); i++) g_h1[i] = g_r2[i] + g_bpre1[i] * silu_grad(t.h1[i]);
    }

    // descend backward (stride 2)
    {
        std::vector<double> g_dpre(C * hw, 0.0);
        conv3x3_backward_params(t.d_pre.data(), C, t.h, t.w, g_h1.data(), C2, t.h2, t.w2, 2,
                                mut(G_const.down_w), mut(G_const.down_b));
        conv3x3_backward_input(g_h1.data(), C2, t.h2, t.w2, P.down_w, C, 2, g_dpre.data(), t.h, t.w);
        for (size_t i = 0; i < g_m1.size(); i++) g_m1[i] += g_dpre[i] * silu_grad(t.m1[i]);
    }

    // modulation A
    std::vector<double> g_r1(C * hw, 0.0);
    for (int c = 0; c < C; c++) {
        const double sc = 1.0 + t.mod_a[c];
        const double* gm = g_m1.data() + size_t(c) * hw;
        const double* rp = t.r1.data() + size_t(c) * hw;
        double* gr = g_r1.data() + size_t(c) * hw;
        double acc_s = 0.0, acc_b = 0.0;
        for (size_t i = 0; i < hw; i++) {
            gr[i] = gm[i] * sc;
            acc_s += gm[i] * rp[i];
            acc_b += gm[i];
        }
        g_mod_a[c] += acc_s;
        g_mod_a[C + c] += acc_b;
    }

    // residual block A and stem
    {
        std::vector<double> g_apre2(C * hw, 0.0), g_ac1(C * hw, 0.0), g_apre1(C * hw, 0.0);
        std::vector<double> g_h0(C * hw, 0.0);
        conv3x3_backward_params(t.a_pre2.data(), C, t.h, t.w, g_r1.data(), C, t.h, t.w, 1,
                                mut(G_const.a2_w), mut(G_const.a2_b));
        conv3x3_backward_input(g_r1.data(), C, t.h, t.w, P.a2_w, C, 1, g_apre2.data(), t.h, t.w);
        for (size_t i = 0; i < g_ac1.size(); i++) g_ac1[i] = g_apre2[i] * silu_grad(t.a_c1[i]);
        conv3x3_backward_params(t.a_pre1.data(), C, t.h, t.w, g_ac1.data(), C, t.h, t.w, 1,
                                mut(G_const.a1_w), mut(G_const.a1_b));
        conv3x3_backward_input(g_ac1.data(), C, t.h, t.w, P.a1_w, C, 1, g_apre1.data(), t.h, t.w);
        for (size_t i = 0; i < g_h0.size(); i++) g_h0[i] = g_r1[i] + g_apre1[i] * silu_grad(t.h0[i]);
        conv3x3_backward_params(t.in2.data(), 2, t.h, t.w, g_h0.data(), C, t.h, t.w, 1,
                                mut(G_const.stem_w), mut(G_const.stem_b));
        // gradient w.r.t. the network input is not needed
    }

    // embedding backward
    {
        const int E = t.E, F2v = t.F2;
        std::vector<double> g_e(E, 0.0), g_elin(E, 0.0);
        struct ModRef {
            const double* g_mod;
            int dim;
            const double* w;
            double* gw;
            double* gb;
        };
        ModRef mods[3] = {
            {g_mod_a.data(), C2, P.ea_w, mut(G_const.ea_w), mut(G_const.ea_b)},
            {g_mod_b.data(), 2 * C2, P.eb_w, mut(G_const.eb_w), mut(G_const.eb_b)},
            {g_mod_c.data(), C2, P.ec_w, mut(G_const.ec_w), mut(G_const.ec_b)},
        };
        for (const ModRef& m : mods) {
            for (int o = 0; o < m.dim; o++) {
                const double g = m.g_mod[o];
                m.gb[o] += g;
                const double* row = m.w + size_t(o) * E;
                double* grow = m.gw + size_t(o) * E;
                for (int i = 0; i < E; i++) {
                    grow[i] += g * t.e[i];
                    g_e[i] += g * row[i];
                }
            }
        }
        for (int i = 0; i < E; i++) g_elin[i] = g_e[i] * silu_grad(t.e_lin[i]);
        double* g_e1w = mut(G_const.e1_w);
        double* g_e1b = mut(G_const.e1_b);
        for (int o = 0; o < E; o++) {
            g_e1b[o] += g_elin[o];
            double* grow = g_e1w + size_t(o) * F2v;
            for (int i = 0; i < F2v; i++) grow[i] += g_elin[o] * t.ff[i];
        }
    }
}

void check_apply_inputs(const ScoreModelArch& a, const Field& mt, const Field& x, double sigma) {
    require_same_shape(mt, x, "score model apply");
    if (mt.width < 4 || mt.height < 4 || mt.width % 2 != 0 || mt.height % 2 != 0)
        throw shape_error("score model apply: grid must be even-sized and at least 4x4");
    const double lo = a.sigma_min * (1.0 - 1e-9), hi = a.sigma_max * (1.0 + 1e-9);
    if (!(sigma >= lo && sigma <= hi))
        throw config_error("score model apply: sigma outside [sigma_min, sigma_max]");
    for (double v : mt.values)
        if (!std::isfinite(v)) throw numeric_error("score model apply: non-finite value in input field");
    for (double v : x.values)
        if (!std::isfinite(v)) throw numeric_error("score model apply: non-finite value in conditioning image");
}

std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

}  // namespace

// ---- arch -------------------------------------------------------------------

void ScoreModelArch::validate() const {
    if (base_channels < 1) throw config_error("ScoreModelArch: base_channels must be >= 1");
    if (embed_freqs < 2) throw config_error("ScoreModelArch: embed_freqs must be >= 2");
    if (embed_hidden < 1) throw config_error("ScoreModelArch: embed_hidden must be >= 1");
    if (!(sigma_min > 0.0 && sigma_min < sigma_max))
        throw config_error("ScoreModelArch: need 0 < sigma_min < sigma_max");
}

std::string ScoreModelArch::canonical() const {
    std::ostringstream os;
    os << "condunet2 base=" << base_channels << " freqs=" << embed_freqs
       << " hidden=" << embed_hidden << " smin=" << format_double(sigma_min)
       << " smax=" << format_double(sigma_max);
    return os.str();
}

ScoreModelArch ScoreModelArch::parse(const std::string& text) {
    std::istringstream is(text);
    std::string tag;
    is >> tag;
    if (tag != "condunet2") throw io_error("unknown architecture descriptor: " + text);
    ScoreModelArch a;
    std::string tok;
    while (is >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw io_error("malformed architecture token: " + tok);
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "base") a.base_channels = std::stoi(val);
        else if (key == "freqs") a.embed_freqs = std::stoi(val);
        else if (key == "hidden") a.embed_hidden = std::stoi(val);
        else if (key == "smin") a.sigma_min = std::stod(val);
        else if (key == "smax") a.sigma_max = std::stod(val);
        else throw io_error("unknown architecture key: " + key);
    }
    a.validate();
    return a;
}

// ---- model ------------------------------------------------------------------

namespace {

std::vector<ParamSlot> build_slots(const ScoreModelArch& a) {
    Layout L(a);
    std::vector<ParamSlot> slots;
    for (size_t i = 0; i < L.entries.size(); i++) {
        slots.push_back({std::string(L.entries[i].name) + "_w", L.offsets[i], L.entries[i].w_count});
        slots.push_back({std::string(L.entries[i].name) + "_b", L.offsets[i] + L.entries[i].w_count,
                         L.entries[i].b_count});
    }
    return slots;
}

size_t fan_in_of(const ScoreModelArch& a, const std::string& slot_name) {
    const size_t C = a.base_channels, C2 = 2 * C, C3 = 3 * C;
    if (slot_name == "stem_w") return 2 * 9;
    if (slot_name == "res_a1_w" || slot_name == "res_a2_w" || slot_name == "res_c1_w" ||
        slot_name == "res_c2_w" || slot_name == "head_w" || slot_name == "down_w")
        return C * 9;
    if (slot_name == "res_b1_w" || slot_name == "res_b2_w") return C2 * 9;
    if (slot_name == "fuse_w") return C3 * 9;
    if (slot_name == "emb_lin_w") return 2 * size_t(a.embed_freqs);
    if (slot_name == "emb_mod_a_w" || slot_name == "emb_mod_b_w" || slot_name == "emb_mod_c_w")
        return a.embed_hidden;
    return 0;  // biases
}

}  // namespace

ScoreModel ScoreModel::create(const ScoreModelArch& arch, Rng& rng) {
    arch.validate();
    ScoreModel m;
    m.arch_ = arch;
    m.slots_ = build_slots(arch);
    m.params_.assign(Layout(arch).total, 0.0);
    for (const ParamSlot& s : m.slots_) {
        // zero head and zero modulation heads; scaled normal elsewhere
        if (s.name == "head_w" || s.name == "head_b" || s.name.starts_with("emb_mod")) continue;
        size_t fan = fan_in_of(arch, s.name);
        if (fan == 0) continue;  // biases start at zero
        const double std_dev = 1.0 / std::sqrt(double(fan));
        for (size_t i = 0; i < s.count; i++) m.params_[s.offset + i] = std_dev * rng.normal();
    }
    return m;
}

ScoreModel ScoreModel::create_fully_random(const ScoreModelArch& arch, Rng& rng) {
    ScoreModel m = create(arch, rng);
    for (const ParamSlot& s : m.slots_) {
        size_t fan = fan_in_of(arch, s.name);
        const double std_dev = fan == 0 ? 0.05 : 1.0 / std::sqrt(double(fan));
        for (size_t i = 0; i < s.count; i++) m.params_[s.offset + i] = std_dev * rng.normal();
    }
    return m;
}

ScoreModel ScoreModel::from_parts(const ScoreModelArch& arch, std::vector<double> params) {
    arch.validate();
    ScoreModel m;
    m.arch_ = arch;
    m.slots_ = build_slots(arch);
    if (params.size() != Layout(arch).total)
        throw io_error("parameter count does not match the architecture descriptor");
    for (double v : params)
        if (!std::isfinite(v)) throw numeric_error("non-finite model parameter");
    m.params_ = std::move(params);
    return m;
}

Field ScoreModel::noise_estimate(const Field& mt, const Field& x, double sigma) const {
    check_apply_inputs(arch_, mt, x, sigma);
    Tape<double> t(arch_, mt.height, mt.width);
    forward_pass(arch_, params_.data(), mt, x, sigma, t);
    Field out(mt.width, mt.height);
    out.values.assign(t.zhat.begin(), t.zhat.end());
    return out;
}

Field ScoreModel::apply(const Field& mt, const Field& x, double sigma) const {
    Field zhat = noise_estimate(mt, x, sigma);
    for (double& v : zhat.values) v = -v / sigma;
    return zhat;
}

FloatScoreNet::FloatScoreNet(const ScoreModel& model) : arch_(model.arch()) {
    params_.assign(model.params().begin(), model.params().end());
}

Field FloatScoreNet::apply(const Field& mt, const Field& x, double sigma) const {
    check_apply_inputs(arch_, mt, x, sigma);
    Tape<float> t(arch_, mt.height, mt.width);
    forward_pass(arch_, params_.data(), mt, x, sigma, t);
    Field out(mt.width, mt.height);
    const float inv = float(-1.0 / sigma);
    for (size_t i = 0; i < out.size(); i++) out.values[i] = double(t.zhat[i] * inv);
    return out;
}

DsmResult loss_and_gradients(const ScoreModel& model, std::span<const TrainPair> batch,
                             const SigmaSchedule& sched, Rng rng) {
    if (batch.empty()) throw config_error("loss_and_gradients: empty batch");
    sched.validate();
    for (const TrainPair& p : batch)
        check_apply_inputs(model.arch(), *p.target, *p.image, sched.sigma_min);
    const size_t n_params = model.param_count();
    const size_t B = batch.size();

    std::vector<double> item_loss(B, 0.0);
    std::vector<std::vector<double>> item_grad(B);
    std::vector<int> item_bad(B, 0);

#pragma omp parallel for schedule(dynamic, 1)
    for (size_t i = 0; i < B; i++) {
        const Field& m0 = *batch[i].target;
        const Field& x = *batch[i].image;
        Rng item_rng = rng.split(i);
        const double tt = item_rng.uniform01();
        const double sigma = sched.sigma_at(tt);
        Field z = item_rng.normal_field(m0.width, m0.height);
        Field mt = perturb(m0, sigma, z);
        Field target = dsm_target(mt, m0, sigma);

        Tape<double> tape(model.arch(), m0.height, m0.width);
        forward_pass(model.arch(), model.params().data(), mt, x, sigma, tape);

        const size_t P = m0.size();
        Field score(m0.width, m0.height);
        for (size_t p = 0; p < P; p++) score.values[p] = -tape.zhat[p] / sigma;
        const double loss = dsm_loss(score, target, sigma) / double(B);
        const double wgt = sigma * sigma / (double(B) * double(P));
        std::vector<double> g_zhat(P);
        for (size_t p = 0; p < P; p++)
            g_zhat[p] = -2.0 * wgt * (score.values[p] - target.values[p]) / sigma;
        if (!std::isfinite(loss)) {
            item_bad[i] = 1;
            continue;
        }
        item_loss[i] = loss;
        item_grad[i].assign(n_params, 0.0);
        backward_pass(model.arch(), model.params().data(), tape, g_zhat, item_grad[i].data());
    }

    for (size_t i = 0; i < B; i++)
        if (item_bad[i])
            throw numeric_error("loss_and_gradients: non-finite loss at batch index " + std::to_string(i));

    DsmResult res;
    res.grad.assign(n_params, 0.0);
    for (size_t i = 0; i < B; i++) {
        res.loss += item_loss[i];
        const std::vector<double>& g = item_grad[i];
        for (size_t p = 0; p < n_params; p++) res.grad[p] += g[p];
    }
    return res;
}

}  // namespace sdfscore
