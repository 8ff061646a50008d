#include <cstring>
#include <sstream>

#include <catch_amalgamated.hpp>

#include "sstempo/checkpoint.hpp"
#include "sstempo/config.hpp"
#include "sstempo/errors.hpp"
#include "sstempo/matrix_io.hpp"
#include "support.hpp"

using namespace sstempo;

TEST_CASE("STEM1 byte layout", "[io]") {
  MatrixRF m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  std::ostringstream os;
  write_stem_record(os, m);
  const std::string bytes = os.str();
  REQUIRE(bytes.size() == stem_record_size(2, 3));
  REQUIRE(bytes.size() == 5 + 8 + 6 * 4);
  CHECK(bytes.substr(0, 5) == "STEM1");
  CHECK(bytes.substr(5, 8) == std::string("\x02\0\0\0\x03\0\0\0", 8));
  float third = 0.0F;
  std::memcpy(&third, bytes.data() + 13 + 2 * 4, 4);
  CHECK(third == 3.0F);
  std::istringstream is(bytes);
  CHECK(read_stem_record(is) == m);
}

TEST_CASE("STEM1 rejects bad input", "[io]") {
  std::istringstream wrong("STEMX\x01\0\0\0\x01\0\0\0abcd");
  CHECK_THROWS_AS(read_stem_record(wrong), FormatError);
  std::istringstream truncated(std::string("STEM1\x02\0\0\0\x02\0\0\0abcd", 17));
  CHECK_THROWS_AS(read_stem_record(truncated), FormatError);
  CHECK_THROWS_AS(read_matrix("/nonexistent/x.stem"), DataError);
}

TEST_CASE("matrix files with axis sidecar", "[io]") {
  testing::TempDir dir("mat");
  MatrixRF m = MatrixRF::Random(4, 3);
  write_matrix(dir / "m.stem", m);
  CHECK(read_matrix(dir / "m.stem") == m);
  const std::vector<double> axis{25.0, 26.5, 28.0};
  write_axis_csv(dir / "axis.csv", axis, "bpm");
  CHECK(testing::slurp(dir / "axis.csv").rfind("bpm\n25", 0) == 0);
  CHECK(read_axis_csv(dir / "axis.csv") == axis);
  CHECK_THROWS_AS(write_matrix_csv(dir / "m.csv", m, std::vector<double>{1.0}), ContractError);
}

TEST_CASE("tensor bundles record offsets in a manifest", "[io]") {
  testing::TempDir dir("bundle");
  TensorBundle b;
  b.metadata["format"] = "test";
  b.tensors.push_back({"a", MatrixRF::Constant(2, 2, 1.5F)});
  b.tensors.push_back({"b", MatrixRF::Constant(1, 5, -2.0F)});
  write_bundle(dir / "b.stem", b);
  const std::string manifest = testing::slurp(manifest_path(dir / "b.stem"));
  CHECK(manifest.find("format=test\n") != std::string::npos);
  CHECK(manifest.find("name,rows,cols,offset\na,2,2,0\nb,1,5,29\n") != std::string::npos);
  CHECK(std::filesystem::file_size(dir / "b.stem") == stem_record_size(2, 2) + stem_record_size(1, 5));
  const TensorBundle r = read_bundle(dir / "b.stem");
  CHECK(r.metadata.at("format") == "test");
  CHECK(r.at("b") == b.tensors[1].value);
  CHECK_THROWS_AS(r.at("c"), FormatError);
}

TEST_CASE("model checkpoints round trip", "[io]") {
  testing::TempDir dir("ckpt");
  const auto p = nn::init_params<float>(nn::ModelConfig::with_width(4), 3);
  save_model(dir / "model.stem", p, {{"kind", "fourier"}});
  const LoadedModel m = load_model(dir / "model.stem");
  CHECK(m.metadata.at("kind") == "fourier");
  CHECK(m.params.config.encoder.d == 4);
  REQUIRE(m.params.size() == p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(m.params.names[i] == p.names[i]);
    CHECK(m.params.tensors[i] == p.tensors[i]);
  }

  auto s = nn::AdamState<float>::for_params(p);
  auto g = p.zeros_like();
  g.tensors[0].setConstant(0.5F);
  auto q = p;
  nn::adam_step(q, g, s);
  save_adam_state(dir / "adam.stem", s, q);
  const auto rs = load_adam_state(dir / "adam.stem", q);
  CHECK(rs.step == 1);
  CHECK(rs.config.lr == s.config.lr);
  CHECK(rs.m[0] == s.m[0]);
  CHECK(rs.v[0] == s.v[0]);
  CHECK_THROWS_AS(load_model(dir / "adam.stem"), FormatError);
}

TEST_CASE("TOML parsing", "[io]") {
  const Config c = Config::parse(R"(
# experiment
[experiment]
name = "run a"   # trailing comment
seed = 1_000
mu = 70.5
save_audio = true
path = 'C:\raw'

[grid]
kinds = [
  "acf",
  "fourier",  # inline
]
tempi = [35, 40.5]
)");
  CHECK(c.get_string("experiment.name", "") == "run a");
  CHECK(c.get_int("experiment.seed", 0) == 1000);
  CHECK(c.get_double("experiment.mu", 0) == 70.5);
  CHECK(c.get_bool("experiment.save_audio", false));
  CHECK(c.get_string("experiment.path", "") == "C:\\raw");
  CHECK(c.get_strings("grid.kinds") == std::vector<std::string>{"acf", "fourier"});
  CHECK(c.at("grid.tempi").items.size() == 2);
  CHECK(c.get_int("experiment.missing", 7) == 7);
  CHECK_THROWS_AS(c.get_int("experiment.mu", 0), ConfigError);
  CHECK_THROWS_AS(c.get_string("experiment.seed", ""), ConfigError);
  CHECK_THROWS_AS(c.at("nope"), ConfigError);
}

TEST_CASE("TOML errors carry line numbers", "[io]") {
  CHECK_THROWS_AS(Config::parse("[a]\nx = 1\nx = 2\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("[a\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("just words\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("x = \"unterminated\n"), ConfigError);
  try {
    Config::parse("[a]\n\nbad line\n");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(Config::load("/nonexistent/config.toml"), ConfigError);
}
