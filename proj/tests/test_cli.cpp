#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <set>

#include "app/app.hpp"
#include "synth/synth.hpp"
#include "test_util.hpp"
#include "train/train.hpp"

using namespace sf;
using sf::testing::run_process;
using sf::testing::TempDir;
namespace fs = std::filesystem;

namespace {

const std::string kCli = SF_CLI_PATH;

sf::testing::ProcessResult cli(const std::string& args) { return run_process("'" + kCli + "' " + args); }

void make_clean_dir(const TempDir& t, int n, int w, int h) {
  fs::create_directories(t.path() / "clean");
  for (int i = 0; i < n; ++i)
    save_png(sf::testing::procedural_image(w, h, 40 + i),
             (t.path() / "clean" / ("img" + std::to_string(i) + ".png")).string());
}

std::string q(const std::string& s) { return "'" + s + "'"; }

}  // namespace

TEST_CASE("synth counting contract") {
  TempDir t("cli_synth");
  make_clean_dir(t, 2, 24, 20);
  auto r = cli("synth --in " + q(t.str("clean")) + " --presets dust,sand,sandstorm --per-image 1 --seed 7 --out " +
               q(t.str("data")));
  CHECK(r.exit_code == 0);
  int pngs = 0;
  for (const auto& e : fs::directory_iterator(t.path() / "data" / "degraded")) pngs += e.path().extension() == ".png";
  CHECK(pngs == 6);
  CHECK(read_manifest(t.str("data/manifest.tsv")).rows.size() == 6);
  CHECK(fs::exists(t.path() / "data" / "REPRO.txt"));
}

TEST_CASE("help lists exactly the parser's flags, with defaults") {
  for (const auto& cmd : app::commands()) {
    auto r = cli(cmd.name + " --help");
    CHECK(r.exit_code == 0);
    std::set<std::string> shown;
    const std::regex flag_re("--([a-z0-9-]+)");
    for (auto it = std::sregex_iterator(r.output.begin(), r.output.end(), flag_re); it != std::sregex_iterator(); ++it)
      shown.insert((*it)[1]);
    std::set<std::string> table{"help"};
    for (const auto& f : cmd.flags) {
      table.insert(app::flag_name(f.key));
      if (!f.default_value.empty())
        CHECK_MESSAGE(r.output.find("--" + app::flag_name(f.key) + " ") != std::string::npos, f.key);
      if (!f.default_value.empty()) {
        const std::string needle = "[" + f.default_value + "]";
        CHECK_MESSAGE(r.output.find(needle) != std::string::npos, cmd.name << " " << f.key);
      }
    }
    CHECK(shown == table);
    // every table key is accepted by the config loader for this command
    Options o;
    for (const auto& f : cmd.flags)
      if (f.required) o.set(f.key, "x");
    CHECK_NOTHROW(app::resolve_options(cmd, o));
  }
}

TEST_CASE("flag table defaults agree with library defaults") {
  Options o;
  o.set("manifest", "m.tsv");
  o.set("out", "r");
  const TrainConfig from_table = TrainConfig::from_options(app::resolve_options(app::command("train"), o));
  TrainConfig lib;
  lib.manifest = "m.tsv";
  CHECK(from_table.to_options().canonical() == lib.to_options().canonical());

  Options s;
  s.set("in", "x");
  s.set("out", "y");
  SynthConfig applied = SynthConfig::defaults();
  applied.apply(app::resolve_options(app::command("synth"), s));
  const SynthConfig d = SynthConfig::defaults();
  CHECK(applied.a_r.lo == d.a_r.lo);
  CHECK(applied.b.hi == d.b.hi);
  for (const auto& [sev, p] : d.presets) {
    CHECK(applied.preset(sev).beta.lo == p.beta.lo);
    CHECK(applied.preset(sev).k2.hi == p.k2.hi);
  }
  CHECK(applied.depth.describe() == d.depth.describe());
}

TEST_CASE("exit code contract") {
  TempDir t("cli_exit");
  CHECK(cli("synth --bogus 1").exit_code == 1);
  CHECK(cli("nosuchcommand").exit_code == 1);
  CHECK(cli("").exit_code == 1);
  CHECK(cli("synth --out " + q(t.str("o"))).exit_code == 1);  // --in missing
  CHECK(cli("synth --in " + q(t.str("absent")) + " --out " + q(t.str("o"))).exit_code == 2);
  CHECK(cli("train --manifest " + q(t.str("absent.tsv")) + " --out " + q(t.str("o"))).exit_code == 2);
  CHECK(cli("train --manifest x --steps abc --out " + q(t.str("o"))).exit_code == 1);
  CHECK(cli("gradcheck --blocks nope").exit_code == 1);
  auto gc = cli("gradcheck --blocks op.add,simple_gate --instances 2 --seed 1");
  CHECK(gc.exit_code == 0);
  CHECK(gc.output.find("op.add\t2\t") != std::string::npos);
}

TEST_CASE("output directories are not overwritten without --force") {
  TempDir t("cli_force");
  make_clean_dir(t, 1, 16, 16);
  const std::string base = "synth --in " + q(t.str("clean")) + " --presets sand --out " + q(t.str("data"));
  CHECK(cli(base).exit_code == 0);
  const std::string before = sf::testing::read_file(t.path() / "data" / "manifest.tsv");
  auto again = cli(base + " --seed 5");
  CHECK(again.exit_code == 2);
  CHECK(again.output.find("--force") != std::string::npos);
  CHECK(sf::testing::read_file(t.path() / "data" / "manifest.tsv") == before);
  CHECK(cli(base + " --seed 5 --force").exit_code == 0);
  CHECK(sf::testing::read_file(t.path() / "data" / "manifest.tsv") != before);
}

TEST_CASE("config files and flag overrides") {
  TempDir t("cli_config");
  make_clean_dir(t, 1, 16, 16);
  REQUIRE(cli("synth --in " + q(t.str("clean")) + " --presets dust --out " + q(t.str("data"))).exit_code == 0);
  {
    std::ofstream f(t.path() / "train.cfg");
    f << "# toy run\nmanifest = " << t.str("data/manifest.tsv") << "\nsteps = 3\ncrop = 16\nbatch = 1\n"
      << "base_channels = 4\nstages = 1\n";
  }
  auto r = cli("train --config " + q(t.str("train.cfg")) + " --steps 2 --out " + q(t.str("run")));
  CHECK(r.exit_code == 0);
  CHECK(load_checkpoint(t.str("run/final.sndf")).step == 2);
  const std::string repro = sf::testing::read_file(t.path() / "run" / "REPRO.txt");
  CHECK(repro.find("steps=2\n") != std::string::npos);
  CHECK(repro.find("base_channels=4\n") != std::string::npos);
  CHECK(repro.find("version: ") != std::string::npos);
  CHECK(repro.find("config_hash: ") != std::string::npos);

  {
    std::ofstream f(t.path() / "bad.cfg");
    f << "steps = 3\nnot_a_key = 1\n";
  }
  auto bad = cli("train --config " + q(t.str("bad.cfg")) + " --manifest x --out " + q(t.str("run2")));
  CHECK(bad.exit_code == 1);
  CHECK(bad.output.find("not_a_key") != std::string::npos);
  CHECK(cli("train --config " + q(t.str("nope.cfg")) + " --manifest x --out " + q(t.str("run3"))).exit_code == 2);
}

TEST_CASE("repro header") {
  Options o;
  o.set("seed", "9");
  o.set("out", "/a");
  o.set("steps", "4");
  Options o2 = o;
  o2.set("out", "/b");
  o2.set("force", "true");
  CHECK(app::config_hash(o) == app::config_hash(o2));
  o2.set("steps", "5");
  CHECK(app::config_hash(o) != app::config_hash(o2));
  const std::string h = app::repro_header("train", o, "T");
  int timestamp_lines = 0;
  std::istringstream in(h);
  for (std::string line; std::getline(in, line);) timestamp_lines += line.find("timestamp") != std::string::npos;
  CHECK(timestamp_lines == 1);
  CHECK(h.find("seed: 9\n") != std::string::npos);
  CHECK(h.find("/a") == std::string::npos);
}

TEST_CASE("eval with a missing clean file marks the row and exits 2") {
  TempDir t("cli_eval");
  make_clean_dir(t, 2, 16, 16);
  REQUIRE(cli("synth --in " + q(t.str("clean")) + " --presets sand --out " + q(t.str("data"))).exit_code == 0);
  REQUIRE(cli("train --manifest " + q(t.str("data/manifest.tsv")) +
              " --steps 0 --crop 16 --base-channels 4 --stages 1 --out " + q(t.str("run")))
              .exit_code == 0);
  Manifest m = read_manifest(t.str("data/manifest.tsv"));
  fs::remove(m.resolve(m.rows[0].clean));
  auto r = cli("eval --manifest " + q(t.str("data/manifest.tsv")) + " --checkpoint " + q(t.str("run/final.sndf")) +
               " --out " + q(t.str("ev")));
  CHECK(r.exit_code == 2);
  const std::string report = sf::testing::read_file(t.path() / "ev" / "report.tsv");
  CHECK(report.find("missing\t" + m.rows[0].id) != std::string::npos);
  CHECK(report.find("model\t" + m.rows[1].id) != std::string::npos);
}

TEST_CASE("restore keeps image sizes") {
  TempDir t("cli_restore");
  make_clean_dir(t, 1, 21, 13);
  {
    std::ofstream f(t.path() / "clean" / "broken.png");
    f << "not a png";
  }
  Checkpoint ck;
  ck.config.base_channels = 4;
  ck.config.stages = 2;
  ck.params = Model::build(ck.config, 1).params();
  ck.adam = AdamState::zeros_like(ck.params);
  save_checkpoint(t.str("m.sndf"), ck);
  auto r = cli("restore --checkpoint " + q(t.str("m.sndf")) + " --in " + q(t.str("clean")) + " --out " + q(t.str("rs")));
  CHECK(r.exit_code == 2);  // one unreadable input
  const ImageBuffer out = load_image(t.str("rs/img0.png"));
  const ImageBuffer in = load_image(t.str("clean/img0.png"));
  CHECK(out.same_shape(in));
  CHECK(out == in);  // identity at init, pad and crop are lossless
}

TEST_CASE("repeated runs produce byte-identical trees") {
  // identical flags, including relative paths, run from two different working directories
  TempDir t("cli_det");
  std::map<std::string, std::string> trees[2];
  for (int k = 0; k < 2; ++k) {
    const std::string root = t.str("run" + std::to_string(k));
    fs::create_directories(root + "/in");
    for (int i = 0; i < 2; ++i)
      save_png(sf::testing::procedural_image(20, 20, 40 + i), root + "/in/img" + std::to_string(i) + ".png");
    auto here = [&](const std::string& args) { return run_process("cd " + q(root) + " && '" + kCli + "' " + args); };
    REQUIRE(here("synth --in in --presets dust,sand --seed 3 --out data").exit_code == 0);
    REQUIRE(here("train --manifest data/manifest.tsv --steps 3 --crop 16 --batch 2 --base-channels 4 --stages 1 "
                 "--seed 3 --checkpoint-every 2 --out train")
                .exit_code == 0);
    REQUIRE(here("eval --manifest data/manifest.tsv --checkpoint train/final.sndf --with-dcp --out eval").exit_code ==
            0);
    trees[k] = sf::testing::snapshot_tree(root);
  }
  CHECK(trees[0].size() == trees[1].size());
  for (const auto& [path, body] : trees[0]) CHECK_MESSAGE(trees[1][path] == body, path);
  CHECK(trees[0].count("train/final.sndf") == 1);
  CHECK(trees[0].count("train/ckpt_000002.sndf") == 1);
  CHECK(trees[0].count("eval/REPRO.txt") == 1);
}
