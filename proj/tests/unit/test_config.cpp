#include <doctest.h>

#include <filesystem>
#include <cmath>
#include <fstream>
#include <string>

#include "qpce/config.hpp"
#include "qpce/errors.hpp"

using namespace qpce;

namespace {

const std::filesystem::path presets{QPCE_PRESET_DIR};

std::string config_error(std::string_view text) {
  try {
    (void)parse_config(text);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::config);
    CHECK(e.exit_code() == 1);
    return e.what();
  }
  FAIL("expected a config error");
  return {};
}

bool contains(const std::string& s, std::string_view part) {
  return s.find(part) != std::string::npos;
}

constexpr std::string_view minimal = R"([model]
h0 = X
v = Z
tau = 1
[noise]
alpha = 3
tau_c = 10
)";

}  // namespace

TEST_CASE("fig2 preset") {
  const auto c = load_config(presets / "fig2.ini");
  CHECK(c.noise.kind == NoiseKind::ou);
  CHECK(c.noise.alpha == 3.0);
  CHECK(c.noise.tau_c == 10.0);
  CHECK(c.model.tau == 1.0);
  CHECK(c.pce.P == 9);
  CHECK(c.kle.S == 3);
  CHECK(c.pce.output_points == 200);
  CHECK(c.mc.stderr_target == 5e-3);
}

TEST_CASE("defaults") {
  const auto c = parse_config(minimal);
  CHECK(c.kle.grid_size == 400);
  CHECK_FALSE(c.kle.candidate_modes.has_value());
  CHECK(c.kle.S == 3);
  CHECK(c.pce.P == 9);
  CHECK_FALSE(c.pce.dt_max.has_value());
  CHECK(c.mc.n_traj == 20000);
  CHECK(c.mc.batch == 250);
  CHECK(c.observable.op == "X");
  CHECK(c.model.initial_state == "x+");
  CHECK(c.tolerances.hermitian == 1e-12);
}

TEST_CASE("validation errors carry line numbers") {
  auto e = config_error("[model]\nh0 = X\nv = Z\ntau = 1\n[noise]\n");
  CHECK(contains(e, "alpha"));
  CHECK(contains(e, "line 5"));

  e = config_error(std::string(minimal) + "[pce]\nP = -1\n");
  CHECK(contains(e, "line 9"));
  CHECK(contains(e, "'P'"));

  e = config_error(std::string(minimal) + "[pce]\nwidth = 3\n");
  CHECK(contains(e, "line 9"));
  CHECK(contains(e, "unknown key 'width'"));

  e = config_error(std::string(minimal) + "[plot]\n");
  CHECK(contains(e, "unknown section"));

  e = config_error("[model]\nh0 = X\nv = Z\ntau = 1x\n[noise]\nalpha = 1\ntau_c = 1\n");
  CHECK(contains(e, "line 4"));

  e = config_error("[model]\nh0 = X\nh0 = Z\n");
  CHECK(contains(e, "duplicate key"));

  e = config_error("tau = 1\n");
  CHECK(contains(e, "outside a section"));

  e = config_error("[noise]\nalpha = 1\ntau_c = 1\n");
  CHECK(contains(e, "'h0'"));

  e = config_error(std::string(minimal) + "[mc]\ndt = 0.5\n");
  CHECK(contains(e, "tau/100"));

  e = config_error("[model]\nh0 = X\nv = [1, 2; 3, 4]\ntau = 1\n[noise]\nalpha = 1\ntau_c = 1\n");
  CHECK(contains(e, "line 3"));

  e = config_error("[model]\nh0 = XX\nv = Z\ntau = 1\n[noise]\nalpha = 1\ntau_c = 1\n");
  CHECK(contains(e, "line 2"));

  e = config_error(std::string(minimal) + "[noise]\n");
  CHECK(contains(e, "duplicate section"));

  e = config_error(std::string(minimal) + "[kle]\nS = 0\n");
  CHECK(contains(e, "'S'"));
}

TEST_CASE("round trip of every preset") {
  for (const auto& entry : std::filesystem::directory_iterator(presets)) {
    if (entry.path().extension() != ".ini") continue;
    CAPTURE(entry.path().string());
    const auto c = load_config(entry.path());
    const auto again = parse_config(emit_config(c));
    CHECK(again == c);
    CHECK(emit_config(again) == emit_config(c));
  }
  auto c = parse_config(minimal);
  c.kle.candidate_modes = 20;
  c.pce.dt_max = 1.0 / 3000.0;
  c.mc.dt = 0.001;
  c.mc.sampler = NoiseSampler::truncated_kle;
  c.sweep.dimensions = {1, 3};
  c.mc.seed = 18446744073709551615ull;
  CHECK(parse_config(emit_config(c)) == c);
}

TEST_CASE("operator specs") {
  CHECK(parse_operator("1*X + 0.5*Z") == pauli::x() + 0.5 * pauli::z());
  CHECK(parse_operator("-Y") == -pauli::y());
  CHECK(parse_operator("20 X") == 20.0 * pauli::x());
  CHECK(parse_operator("2.5e-1 Z - X") == 0.25 * pauli::z() - pauli::x());
  CHECK(parse_operator("0") == Operator::Zero(2, 2));
  CHECK(parse_operator("0", 4) == Operator::Zero(4, 4));
  CHECK(parse_operator("[0, -i; i, 0]") == pauli::y());
  CHECK(parse_operator("[1 0; 0 -1]") == pauli::z());
  const Operator m = parse_operator("[2, 1-2i; 1+2i, -0.5]");
  CHECK(m(0, 1) == Complex(1.0, -2.0));
  CHECK(m(1, 0) == Complex(1.0, 2.0));
  const Operator xz = parse_operator("XZ");
  CHECK(xz.rows() == 4);
  CHECK(xz(0, 2) == 1.0);
  CHECK(xz(1, 3) == -1.0);
  CHECK_THROWS_AS((void)parse_operator("Q"), Error);
  CHECK_THROWS_AS((void)parse_operator("X + ZZ"), Error);
  CHECK_THROWS_AS((void)parse_operator("[1, 2; 3]"), Error);
  CHECK_THROWS_AS((void)parse_operator("2 *"), Error);
}

TEST_CASE("initial states") {
  CHECK((parse_initial_state("x+").op() - 0.5 * (pauli::identity() + pauli::x())).norm() < 1e-15);
  CHECK(parse_initial_state("z+ z-").dim() == 4);
  CHECK_THROWS_AS((void)parse_initial_state("w+"), Error);
}

TEST_CASE("tabulated noise from a file") {
  const auto dir = std::filesystem::temp_directory_path() / "qpce_config_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream t(dir / "table.csv");
    t.precision(17);
    t << "# lag, C\n";
    for (int k = 0; k <= 20; ++k) t << k * 0.05 << ", " << std::exp(-k * 0.05) << "\n";
  }
  {
    std::ofstream c(dir / "run.ini");
    c << "[model]\nh0 = X\nv = Z\ntau = 1\n[noise]\nkind = tabulated\ntable = table.csv\n";
  }
  const auto cfg = load_config(dir / "run.ini");
  CHECK(cfg.noise.kind == NoiseKind::tabulated);
  const auto kernel = build_kernel(cfg);
  CHECK(kernel.at(0.5) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(kernel.at(0.525) == doctest::Approx(0.5 * (std::exp(-0.5) + std::exp(-0.55))));
  const auto model = build_model(cfg);
  CHECK(model.dim() == 2);

  {
    std::ofstream t(dir / "table.csv");
    t << "0, 1\n0.1, 0.9\n0.3, 0.5\n";
  }
  CHECK_THROWS_AS((void)build_kernel(load_config(dir / "run.ini")), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("output grid") {
  const auto t = output_grid(2.0, 5);
  REQUIRE(t.size() == 5);
  CHECK(t[0] == 0.0);
  CHECK(t[2] == 1.0);
  CHECK(t[4] == 2.0);
  CHECK_THROWS_AS((void)output_grid(1.0, 1), Error);
}
