#include "cli.hpp"
#include "vise/checkpoint.hpp"
#include "vise/config.hpp"
#include "vise/training.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace vise;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
  Json error() const { return Json::parse(err).at("error"); }
};

Result vise_run(std::vector<std::string> args, const char* env_seed = nullptr) {
  args.insert(args.begin(), "vise");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err, env_seed);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

/// Desk scene with a tiny, quickly overfit network.
std::string toy_config(const TempDir& dir) {
  auto c = config::desk_config(5);
  c.network.conv_channels = {4, 8};
  c.network.fc_hidden = 128;
  c.network.dropout_p = 0.0;
  c.train.batch_size = 4;
  c.train.max_epochs = 4000;
  c.train.lr = 3e-3;
  c.train.lr_decay_every = 500;
  c.train.weight_decay = 0.0;
  c.train.early_stop_patience.reset();
  c.dataset.train = 4;
  c.dataset.test = 2;
  const auto path = dir / "toy.json";
  std::ofstream(path) << Json(c).dump(2);
  return path;
}

}  // namespace

TEST_CASE("help lists every flag and every exit code") {
  std::vector<std::string> scopes{""};
  for (const auto& s : cli::subcommands()) scopes.push_back(s);
  CHECK(scopes.size() == 11);
  for (const auto& scope : scopes) {
    CAPTURE(scope);
    const auto help = cli::help_text(scope);
    for (const auto& name : cli::option_names(scope)) {
      CAPTURE(name);
      CHECK(help.find(name) != std::string::npos);
    }
    for (const auto& e : cli::exit_codes()) {
      CHECK(help.find("  " + std::to_string(e.code) + "  " + e.name) != std::string::npos);
    }
    if (!scope.empty()) {
      const auto r = vise_run({scope, "--help"});
      CHECK(r.code == 0);
      CHECK(r.out == help);
    }
  }
  const auto top = cli::help_text("");
  for (const auto& s : cli::subcommands()) CHECK(top.find(s) != std::string::npos);
}

TEST_CASE("usage and input errors are JSON on stderr with distinct codes") {
  TempDir dir("vise_test_cli_errors");
  auto r = vise_run({});
  CHECK(r.code == cli::kUsage);
  CHECK(r.error().at("type") == "usage");
  r = vise_run({"gen", "--bogus"});
  CHECK(r.code == cli::kUsage);
  r = vise_run({"eval", "--weights", dir / "missing.bin", "--data", dir / "missing"});
  CHECK(r.code == cli::kIo);
  CHECK(r.error().at("message").get<std::string>().find("missing.bin") != std::string::npos);

  std::ofstream(dir / "bad.json") << R"({"seed": 1, "network": {"input_size": 100}})";
  r = vise_run({"gen", "--config", dir / "bad.json", "--out", dir / "d"});
  CHECK(r.code == cli::kConfig);
  std::ofstream(dir / "noseed.json") << "{}";
  r = vise_run({"schedule", "--config", dir / "noseed.json"});
  CHECK(r.code == cli::kConfig);

  std::ofstream(dir / "junk.bin") << "VISEW001 but not really";
  std::ofstream(dir / "a.pgm") << "P5\n1 1\n255\n";
  r = vise_run({"infer", "--weights", dir / "junk.bin", dir / "a.pgm", dir / "a.pgm"});
  CHECK(r.code == cli::kCorruptWeights);
  std::ofstream(dir / "png.bin") << "\x89PNG\r\n\x1a\n";
  r = vise_run({"infer", "--weights", dir / "png.bin", dir / "a.pgm", dir / "a.pgm"});
  CHECK(r.code == cli::kCorruptWeights);
  r = vise_run({"infer", "--weights", dir / "png.bin", dir / "a.pgm"});
  CHECK(r.code == cli::kUsage);
}

TEST_CASE("schedule and seed precedence") {
  TempDir dir("vise_test_cli_seed");
  auto r = vise_run({"schedule"});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::vector<std::string> rows;
  for (std::string l; std::getline(lines, l);) rows.push_back(l);
  REQUIRE(rows.size() == 451);
  CHECK(rows[1] == "0,0.0001,0,0");
  CHECK(rows[201].rfind("200,5.0000000000000002e-05,", 0) == 0);

  REQUIRE(vise_run({"init-config", "--out", dir / "c.json", "--seed", "41"}).code == 0);
  auto seed_of = [&](const std::vector<std::string>& extra, const char* env) {
    std::vector<std::string> args{"observe", "--config", dir / "c.json", "--out", dir / "o.json"};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto res = vise_run(args, env);
    REQUIRE(res.code == 0);
    return Json::parse(res.out).at("seed").get<std::uint64_t>();
  };
  CHECK(seed_of({}, nullptr) == 41);
  CHECK(seed_of({}, "17") == 17);
  CHECK(seed_of({"--seed", "3"}, "17") == 3);
  CHECK(vise_run({"observe", "--config", dir / "c.json", "--out", dir / "o.json"}, "x1").code == cli::kUsage);
}

TEST_CASE("gen is byte-reproducible") {
  TempDir dir("vise_test_cli_gen");
  REQUIRE(vise_run({"init-config", "--out", dir / "c.json"}).code == 0);
  for (const char* out : {"a", "b"}) {
    const auto r = vise_run({"gen", "--config", dir / "c.json", "--out", dir / out, "--count", "6", "--jobs", "2"});
    REQUIRE(r.code == 0);
  }
  for (const char* f : {"dataset.json", "manifest.jsonl", "raw/000005_1.pgm", "input/000000_0.pgm"}) {
    CHECK(slurp(fs::path(dir / "a") / f) == slurp(fs::path(dir / "b") / f));
  }
  const auto t = vise_run({"gen", "--config", dir / "c.json", "--out", dir / "t", "--split", "test", "--count", "2"});
  REQUIRE(t.code == 0);
  CHECK(Json::parse(t.out).at("first_index") == 2000);
  CHECK(fs::exists(fs::path(dir / "t") / "raw/002001_0.pgm"));
}

TEST_CASE("realign verdicts") {
  TempDir dir("vise_test_cli_realign");
  const auto cfg = toy_config(dir);
  REQUIRE(vise_run({"gen", "--config", cfg, "--out", dir / "d", "--count", "4"}).code == 0);
  REQUIRE(vise_run({"train", "--config", cfg, "--data", dir / "d", "--val", dir / "d", "--out", dir / "w.bin",
                    "--epochs", "1"})
              .code == 0);

  REQUIRE(vise_run({"observe", "--config", cfg, "--out", dir / "same.json"}).code == 0);
  auto r = vise_run({"realign", "--weights", dir / "w.bin", "--observed-corners", dir / "same.json"});
  REQUIRE(r.code == 0);
  auto j = Json::parse(r.out);
  CHECK(j.at("verdict") == "aligned");
  for (const auto& cam : j.at("cameras")) {
    CHECK(cam.at("translation_mm").get<double>() < 1e-9);
    CHECK(cam.at("rotation_deg").get<double>() < 1e-9);
  }

  REQUIRE(vise_run({"observe", "--config", cfg, "--out", dir / "moved.json", "--shift", "1.46,0,0", "--camera", "1"})
              .code == 0);
  r = vise_run({"realign", "--weights", dir / "w.bin", "--observed-corners", dir / "moved.json",
                "--max-translation-mm", "1.0"});
  REQUIRE(r.code == 0);
  j = Json::parse(r.out);
  CHECK(j.at("verdict") == "misaligned");
  CHECK(j.at("cameras")[0].at("verdict") == "aligned");
  CHECK(j.at("cameras")[1].at("translation_mm").get<double>() == doctest::Approx(1.46).epsilon(1e-9));
  r = vise_run({"realign", "--weights", dir / "w.bin", "--observed-corners", dir / "moved.json", "--config", cfg});
  CHECK(Json::parse(r.out).at("verdict") == "aligned");  // default threshold 2 mm

  std::ofstream(dir / "broken.json") << R"({"cameras": [{"corners": [[1, 2]]}, null]})";
  r = vise_run({"realign", "--weights", dir / "w.bin", "--observed-corners", dir / "broken.json"});
  CHECK(r.code == cli::kIo);
}

TEST_CASE("overfit toy model reproduces its training labels through infer and eval") {
  TempDir dir("vise_test_cli_infer");
  const auto cfg = toy_config(dir);
  REQUIRE(vise_run({"gen", "--config", cfg, "--out", dir / "d", "--count", "4"}).code == 0);
  auto r = vise_run({"train", "--config", cfg, "--data", dir / "d", "--val", dir / "d", "--out", dir / "w.bin"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "w.bin.history.csv"));
  CHECK(Json::parse(r.out).at("best_val_loss").get<double>() < 1e-3);

  const auto ckpt = checkpoint::load(dir / "w.bin");
  const auto data = training::read_dataset(dir / "d");
  const auto expected = training::predict(ckpt.network, training::make_inputs(data.records));
  const std::size_t width = data.records[0].label.values.size();

  double tip_pct_sum = 0.0;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& rec = data.records[i];
    const auto stem = (fs::path(dir / "d") / "raw").string();
    char name[32];
    std::snprintf(name, sizeof name, "/%06zu_", rec.id);
    // infer preprocesses the raw views itself; the stored inputs went through the same pipeline at gen time.
    r = vise_run({"infer", "--weights", dir / "w.bin", stem + name + "0.pgm", stem + name + "1.pgm"});
    REQUIRE(r.code == 0);
    const auto values = Json::parse(r.out).at("values").get<std::vector<double>>();
    REQUIRE(values.size() == width);
    for (std::size_t k = 0; k < width; ++k) {
      CHECK(values[k] == doctest::Approx(expected.data()[i * width + k] * rec.label.scale).epsilon(1e-6));
      CHECK(std::abs(values[k] - rec.label.values[k]) / rec.label.scale < 1e-3);
    }
    double d2 = 0.0;
    for (std::size_t k = width - 3; k < width; ++k) d2 += std::pow(values[k] - rec.label.values[k], 2);
    tip_pct_sum += 100.0 * std::sqrt(d2) / rec.label.scale;
  }

  r = vise_run({"eval", "--weights", dir / "w.bin", "--data", dir / "d", "--out", dir / "rep"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "rep.csv"));
  CHECK(Json::parse(r.out).at("tip").at("mean_pct").get<double>() ==
        doctest::Approx(tip_pct_sum / static_cast<double>(data.records.size())).epsilon(1e-5));

  // A PCC request against these points weights is refused.
  auto pcc = config::load_config(cfg);
  pcc.generate.label.representation = geometry::Representation::Pcc;
  pcc.network.output_size = 6;
  std::ofstream(dir / "pcc.json") << Json(pcc).dump();
  REQUIRE(vise_run({"gen", "--config", dir / "pcc.json", "--out", dir / "p", "--count", "2"}).code == 0);
  r = vise_run({"eval", "--weights", dir / "w.bin", "--data", dir / "p"});
  CHECK(r.code == cli::kSpecMismatch);
}
