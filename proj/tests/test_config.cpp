// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "fedlmd/config.hpp"
#include "fedlmd/errors.hpp"

using namespace fedlmd;

TEST_CASE("empty config text yields the reference defaults") {
  RunConfig cfg = parse_config_text("");
  CHECK(cfg.lr == 0.01);
  CHECK(cfg.lr_decay == 0.99);
  CHECK(cfg.weight_decay == 1e-5);
  CHECK(cfg.momentum == 0.9);
  CHECK(cfg.batch_size == 50);
  CHECK(cfg.clients == 100);
  CHECK(cfg.clients_per_round == 10);
  CHECK(cfg.local_epochs == 5);
  CHECK(cfg.rounds == 200);
  CHECK(validate_config(cfg).empty());
}

TEST_CASE("parsing: comments, whitespace, values") {
  const std::string text =
      "# a comment line\n"
      "loss.kind = lmd   # trailing comment\n"
      "loss.beta = 0.3\n"
      "\n"
      "schedule.rounds=40\n"
      "data.augment = true\n";
  RunConfig cfg = parse_config_text(text);
  CHECK(cfg.loss_kind == "lmd");
  CHECK(cfg.beta == 0.3);
  CHECK(cfg.rounds == 40);
  CHECK(cfg.augment);
}

TEST_CASE("unknown keys and type errors carry the field path") {
  try {
    parse_config_text("loss.bogus = 1\nloss.beta = abc\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("loss.bogus") != std::string::npos);
    CHECK(msg.find("loss.beta") != std::string::npos);
  }
}

TEST_CASE("validation lists every violated field") {
  RunConfig cfg;
  cfg.clients = 100;
  cfg.clients_per_round = 200;  // too many
  cfg.tau = -1.0;               // bad
  cfg.lr = 0.0;                 // bad
  auto v = validate_config(cfg);
  CHECK(v.size() == 3);
  bool saw_cpr = false, saw_tau = false, saw_lr = false;
  for (const auto& msg : v) {
    saw_cpr = saw_cpr || msg.find("clients_per_round") != std::string::npos;
    saw_tau = saw_tau || msg.find("loss.tau") != std::string::npos;
    saw_lr = saw_lr || msg.find("schedule.lr") != std::string::npos;
  }
  CHECK(saw_cpr);
  CHECK(saw_tau);
  CHECK(saw_lr);
}

TEST_CASE("flag overrides supersede file values") {
  RunConfig cfg = parse_config_text("loss.beta = 1.0\n");
  apply_overrides(cfg, {{"loss.beta", "0.3"}});
  CHECK(cfg.beta == 0.3);
  CHECK_THROWS_AS(apply_overrides(cfg, {{"loss.nope", "1"}}), ConfigError);
}

TEST_CASE("resolved snapshot round-trips to an equal config") {
  RunConfig cfg;
  cfg.loss_kind = "lmd_tf";
  cfg.beta = 0.37;
  cfg.tau = 3.0;
  cfg.rounds = 17;
  cfg.alpha = 0.05;
  cfg.image_noise = 0.123456789012345;
  RunConfig resolved = resolve_config(cfg);
  CHECK(resolved.switch_round == 17);                 // lmd_tf -> always Tf
  CHECK(resolved.partition_seed == static_cast<int64_t>(resolved.seed));
  RunConfig reparsed = parse_config_text(config_snapshot(resolved));
  CHECK(reparsed == resolved);
}

TEST_CASE("switch-round auto resolution per loss kind") {
  RunConfig lmd;
  lmd.loss_kind = "lmd";
  CHECK(resolve_config(lmd).switch_round == 0);
  RunConfig ce;
  ce.loss_kind = "ce";
  CHECK(resolve_config(ce).switch_round == 0);
  RunConfig tf;
  tf.loss_kind = "lmd_tf";
  tf.rounds = 31;
  CHECK(resolve_config(tf).switch_round == 31);
  RunConfig manual;
  manual.loss_kind = "lmd";
  manual.switch_round = 5;
  CHECK(resolve_config(manual).switch_round == 5);
}

TEST_CASE("config hash is stable and sensitive") {
  RunConfig a, b;
  CHECK(config_hash(a) == config_hash(b));
  b.beta = 2.0;
  CHECK(config_hash(a) != config_hash(b));
}
