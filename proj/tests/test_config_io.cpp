#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "floqlab/harness.hpp"

using namespace floqlab;
namespace fs = std::filesystem;

namespace {

const char* kCircuitConfig = R"(
# brickwork chain
mode = circuit
dims = 4
q = 2
boundary = open
schedule = brickwork
ensemble_size = 60
master_seed = 91
blocks = 10
statistic = sff t_max=12
statistic = r2 bins=9
observable = sz kind=pauli_z sites=0
statistic = eth observable=sz bins=9
)";

}  // namespace

TEST_CASE("config parses circuit mode", "[config]") {
    const RunConfig cfg = parse_config_text(kCircuitConfig);
    REQUIRE(cfg.mode == "circuit");
    REQUIRE(cfg.dims == std::vector<int>{4});
    REQUIRE(cfg.q == 2);
    REQUIRE(cfg.ensemble_size == 60);
    REQUIRE(cfg.master_seed == 91);
    REQUIRE(cfg.statistics.size() == 3);
    REQUIRE(cfg.statistics[0].kind == "sff");
    REQUIRE(cfg.statistics[0].opt("t_max") == "12");
    REQUIRE(cfg.observables.size() == 1);
    REQUIRE(cfg.observables[0].name == "sz");
    REQUIRE(validate_config(cfg).empty());
    const CircuitSpec spec = to_circuit_spec(cfg);
    REQUIRE(spec.schedule.size() == 2);
}

TEST_CASE("config validation catches problems", "[config]") {
    RunConfig cfg = parse_config_text(kCircuitConfig);
    cfg.ensemble_size = 5;  // below 2 * blocks
    REQUIRE_FALSE(validate_config(cfg).empty());

    cfg = parse_config_text(kCircuitConfig);
    cfg.statistics.push_back(StatRequest{"eth", {{"observable", "nope"}, {"bins", "9"}}});
    const auto errors = validate_config(cfg);
    REQUIRE_FALSE(errors.empty());
    REQUIRE(errors[0].find("nope") != std::string::npos);

    REQUIRE_THROWS_AS(parse_config_text("garbage line\n"), InvalidArgument);
    REQUIRE_THROWS_AS(parse_config_text("unknown_key = 3\n"), InvalidArgument);
}

TEST_CASE("explicit schedules and custom matrices parse", "[config]") {
    const RunConfig cfg = parse_config_text(R"(
mode = circuit
dims = 3
q = 2
schedule = explicit
substep = (0,1)
substep = (1,2)
ensemble_size = 40
blocks = 10
observable = my kind=custom sites=1 matrix=(1,0),(0,-1);(0,1),(-1,0)
statistic = sff t_max=4
)");
    REQUIRE(cfg.explicit_schedule.size() == 2);
    REQUIRE(cfg.explicit_schedule[0] == Substep{{0, 1}});
    REQUIRE(cfg.observables[0].matrix.has_value());
    const MatrixXcd& m = *cfg.observables[0].matrix;
    REQUIRE(m(0, 1) == cplx(0.0, -1.0));
    REQUIRE(m(1, 0) == cplx(0.0, 1.0));
    // that matrix is Hermitian, so resolution succeeds
    const auto pipes = make_pipelines(cfg, 8);
    REQUIRE(pipes.size() == 1);
}

TEST_CASE("cue mode block observable", "[config]") {
    const RunConfig cfg = parse_config_text(R"(
mode = cue
n = 8
ensemble_size = 40
blocks = 10
observable = bz kind=block_z
statistic = eth observable=bz bins=9
statistic = psff na=2 t_max=6
)");
    REQUIRE(validate_config(cfg).empty());
    const ObservableOp o = resolve_observable(cfg.observables[0], cfg, 8);
    REQUIRE(o.trace() == Catch::Approx(0.0).margin(1e-14));
    REQUIRE(o.trace_sq() == Catch::Approx(8.0));
}

TEST_CASE("binary container round-trips bit-exactly", "[config]") {
    const fs::path tmp = fs::temp_directory_path() / "floqlab_test_container.flqb";
    RngStream rng = RngStream::derived(6, {});
    const UnitaryMatrix u = sample_cue(6, rng);
    const SpectralData sd = diagonalize(u);
    Container c;
    c.dim = 6;
    c.op = u.mat();
    c.energies = sd.energies;
    c.vectors = sd.vectors;
    write_container(tmp.string(), c);

    const Container r = read_container(tmp.string());
    REQUIRE(r.dim == 6);
    REQUIRE(r.op.has_value());
    REQUIRE(r.energies.has_value());
    REQUIRE(r.vectors.has_value());
    REQUIRE((*r.op - u.mat()).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((*r.energies - sd.energies).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((*r.vectors - sd.vectors).cwiseAbs().maxCoeff() == 0.0);

    const std::string info = inspect_container(tmp.string());
    REQUIRE(info.find("dim 6") != std::string::npos);
    fs::remove(tmp);

    REQUIRE_THROWS_AS(read_container("/nonexistent/file.flqb"), IoError);
}

TEST_CASE("csv numbers carry 17 significant digits", "[config]") {
    REQUIRE(csv_number(1.0) == "1.0000000000000000e+00");
    REQUIRE(csv_number(-0.03125) == "-3.1250000000000000e-02");
    const std::string pi_text = csv_number(kPi);
    REQUIRE(pi_text.find("3.1415926535897931") == 0);
    REQUIRE(pi_text.find(',') == std::string::npos);
}
