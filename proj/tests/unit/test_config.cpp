#include <doctest.h>

#include "sdfscore/run_config.hpp"

using namespace sdfscore;

TEST_CASE("config parse-serialize-parse is the identity on the canonical form") {
    RunConfig cfg;
    cfg.sigma_max = 7.5;
    cfg.total_steps = 123;
    cfg.target_mode = "binary";
    cfg.seed = 987654321;
    const std::string canonical = cfg.serialize();
    RunConfig back = RunConfig::parse(canonical);
    CHECK(back.serialize() == canonical);
    CHECK(back.sigma_max == 7.5);
    CHECK(back.total_steps == 123);
    CHECK(back.target_mode == "binary");
    CHECK(back.seed == 987654321);
}

TEST_CASE("comments and blank lines are ignored") {
    RunConfig cfg = RunConfig::parse("# a comment\n\nsigma_max = 6 # trailing\n");
    CHECK(cfg.sigma_max == 6.0);
}

TEST_CASE("unknown keys rejected") {
    CHECK_THROWS_AS(RunConfig::parse("not_a_key = 1\n"), config_error);
}

TEST_CASE("duplicate keys rejected") {
    CHECK_THROWS_AS(RunConfig::parse("grid = 32\ngrid = 64\n"), config_error);
}

TEST_CASE("malformed lines rejected") {
    CHECK_THROWS_AS(RunConfig::parse("sigma_max 6\n"), config_error);
    CHECK_THROWS_AS(RunConfig::parse("sigma_max = abc\n"), config_error);
    CHECK_THROWS_AS(RunConfig::parse("grid = 31.5\n"), config_error);
}

TEST_CASE("numeric ranges validated on load") {
    CHECK_THROWS_AS(RunConfig::parse("sigma_min = 0\n"), config_error);
    CHECK_THROWS_AS(RunConfig::parse("sigma_min = 6\n"), config_error);  // >= sigma_max
    CHECK_THROWS_AS(RunConfig::parse("grid = 31\n"), config_error);      // odd
    CHECK_THROWS_AS(RunConfig::parse("grid = 8\n"), config_error);       // too small
    CHECK_THROWS_AS(RunConfig::parse("batch_size = 0\n"), config_error);
    CHECK_THROWS_AS(RunConfig::parse("target_mode = both\n"), config_error);
    CHECK_THROWS_AS(RunConfig::parse("predictor_steps = 1\n"), config_error);
    CHECK_THROWS_AS(RunConfig::parse("corrector_snr = 0\n"), config_error);
    CHECK_THROWS_AS(RunConfig::parse("score_precision = f16\n"), config_error);
    CHECK_THROWS_AS(RunConfig::parse("max_radius_frac = 0.8\n"), config_error);
}

TEST_CASE("delta resolves from the grid size when unset") {
    RunConfig cfg;
    CHECK(cfg.resolved_delta(32, 32) == 5.0);
    CHECK(cfg.resolved_delta(64, 64) == 10.0);
    CHECK(cfg.resolved_delta(128, 128) == 10.0);
    cfg.delta = 7.0;
    CHECK(cfg.resolved_delta(32, 32) == 7.0);
}

TEST_CASE("defaults follow the diffusion and sampling settings") {
    RunConfig cfg;
    CHECK(cfg.sigma_min == 1e-3);
    CHECK(cfg.sigma_max == 5.0);
    CHECK(cfg.learning_rate == 1e-4);
    CHECK(cfg.threshold_tau == 3e-3);  // 3 * sigma_min
    CHECK(cfg.predictor_steps == 200);
    CHECK(cfg.corrector_steps == 1);
    CHECK(cfg.corrector_snr == 0.15);
    CHECK(cfg.adam_beta1 == 0.9);
    CHECK(cfg.adam_beta2 == 0.999);
    CHECK(cfg.adam_eps == 1e-8);
}
