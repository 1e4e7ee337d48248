#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "floqlab/harness.hpp"

using namespace floqlab;
namespace fs = std::filesystem;

namespace {

RunConfig small_cue_config() {
    return parse_config_text(R"(
mode = cue
n = 8
ensemble_size = 80
master_seed = 777
blocks = 10
statistic = sff t_max=12
statistic = r2 bins=9
statistic = corr_time category=cat1_offdiag t_max=8
)");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("worker count does not change the outputs", "[harness]") {
    const RunConfig cfg = small_cue_config();
    const EnsembleSource source = make_source(cfg);

    RunOptions opts;
    opts.samples = cfg.ensemble_size;
    opts.blocks = cfg.blocks;

    opts.workers = 1;
    auto pipes1 = make_pipelines(cfg, source.dim());
    const RunOutput out1 = run_ensemble(source, pipes1, opts);

    opts.workers = 2;
    auto pipes2 = make_pipelines(cfg, source.dim());
    const RunOutput out2 = run_ensemble(source, pipes2, opts);

    opts.workers = 7;
    auto pipes3 = make_pipelines(cfg, source.dim());
    const RunOutput out3 = run_ensemble(source, pipes3, opts);

    REQUIRE(out1.reports.size() == out2.reports.size());
    for (size_t r = 0; r < out1.reports.size(); ++r) {
        REQUIRE(out1.reports[r].rows.size() == out2.reports[r].rows.size());
        for (size_t k = 0; k < out1.reports[r].rows.size(); ++k) {
            // bit-identical accumulation regardless of the worker layout
            REQUIRE(out1.reports[r].rows[k].measured == out2.reports[r].rows[k].measured);
            REQUIRE(out1.reports[r].rows[k].error == out2.reports[r].rows[k].error);
            REQUIRE(out1.reports[r].rows[k].measured == out3.reports[r].rows[k].measured);
        }
    }
}

TEST_CASE("reruns with the same seed write byte-identical CSVs", "[harness]") {
    const RunConfig cfg = small_cue_config();
    const EnsembleSource source = make_source(cfg);
    RunOptions opts;
    opts.samples = cfg.ensemble_size;
    opts.blocks = cfg.blocks;
    opts.workers = 2;

    const fs::path dir_a = fs::temp_directory_path() / "floqlab_run_a";
    const fs::path dir_b = fs::temp_directory_path() / "floqlab_run_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    auto pipes_a = make_pipelines(cfg, source.dim());
    write_run_outputs(dir_a.string(), run_ensemble(source, pipes_a, opts), cfg.z_gate);
    auto pipes_b = make_pipelines(cfg, source.dim());
    write_run_outputs(dir_b.string(), run_ensemble(source, pipes_b, opts), cfg.z_gate);

    int compared = 0;
    for (const auto& entry : fs::directory_iterator(dir_a)) {
        const fs::path other = dir_b / entry.path().filename();
        REQUIRE(fs::exists(other));
        REQUIRE(slurp(entry.path()) == slurp(other));
        ++compared;
    }
    REQUIRE(compared >= 4);  // three statistics + summary
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("cue run passes its own z gate", "[harness][slow]") {
    RunConfig cfg = small_cue_config();
    cfg.ensemble_size = 400;
    const EnsembleSource source = make_source(cfg);
    RunOptions opts;
    opts.samples = cfg.ensemble_size;
    opts.blocks = cfg.blocks;
    auto pipes = make_pipelines(cfg, source.dim());
    const RunOutput out = run_ensemble(source, pipes, opts);
    const RunSummary sum = summarize_run(out, 5.0);
    INFO(sum.text);
    REQUIRE(sum.passed);
    REQUIRE(out.diagnostics.failures == 0);
    REQUIRE(out.diagnostics.max_unitarity_residual <= 1e-10);
    REQUIRE(out.diagnostics.max_recon_residual <= 1e-8);
    REQUIRE(out.diagnostics.max_trace_identity_dev <= 1e-10);
}

TEST_CASE("failure-rate guard aborts on a broken source", "[harness]") {
    // non-unitary matrices sneak past a loose construction tolerance and
    // must be caught by the runner's own residual gate
    auto bad_sampler = [](long) {
        return UnitaryMatrix::checked(MatrixXcd::Identity(4, 4) * 1.5, 10.0);
    };
    std::vector<std::unique_ptr<StatisticPipeline>> pipes;
    pipes.push_back(std::make_unique<SffPipeline>(4, 4, 4));
    RunOptions opts;
    opts.samples = 20;
    opts.blocks = 4;
    opts.workers = 1;
    REQUIRE_THROWS_AS(run_ensemble(bad_sampler, pipes, opts), Error);
}

TEST_CASE("jackknife errors shrink like 1/sqrt(M) on the sff ramp", "[harness][slow]") {
    // doubling the ensemble shrinks reported errors by ~ 1/sqrt(2)
    auto run_errors = [](long m) {
        RunConfig cfg = small_cue_config();
        cfg.ensemble_size = m;
        cfg.blocks = 20;
        const EnsembleSource source = make_source(cfg);
        RunOptions opts;
        opts.samples = m;
        opts.blocks = cfg.blocks;
        auto pipes = make_pipelines(cfg, source.dim());
        const RunOutput out = run_ensemble(source, pipes, opts);
        return out.reports[0];  // sff
    };
    const StatReport small = run_errors(600);
    const StatReport big = run_errors(1200);
    double ratio = 0.0;
    int count = 0;
    for (size_t k = 1; k < small.rows.size(); ++k) {
        if (small.rows[k].error <= 0.0) continue;
        ratio += big.rows[k].error / small.rows[k].error;
        ++count;
    }
    ratio /= count;
    INFO("mean error ratio " << ratio);
    REQUIRE(ratio == Catch::Approx(0.70).margin(0.05));
}

TEST_CASE("summary flags a failing statistic", "[harness]") {
    StatReport rep;
    rep.name = "synthetic";
    StatRow row;
    row.measured = 10.0;
    row.error = 1.0;
    row.predicted = 0.0;
    rep.rows.push_back(row);
    RunOutput out;
    out.reports.push_back(rep);
    const RunSummary sum = summarize_run(out, 4.0);
    REQUIRE_FALSE(sum.passed);
    REQUIRE(sum.text.find("FAIL") != std::string::npos);

    // ungated rows do not trip the verdict
    out.reports[0].rows[0].gated = false;
    REQUIRE(summarize_run(out, 4.0).passed);
}

TEST_CASE("bonferroni gate grows with the family size", "[harness]") {
    const double g1 = bonferroni_gate(4.0, 1);
    const double g1024 = bonferroni_gate(4.0, 1024);
    REQUIRE(g1 == Catch::Approx(4.0));
    REQUIRE(g1024 > 5.0);
    REQUIRE(g1024 < 6.0);
    // round-trip through the normal quantile
    REQUIRE(normal_quantile(0.975) == Catch::Approx(1.959964).margin(1e-4));
    REQUIRE(normal_quantile(0.5) == Catch::Approx(0.0).margin(1e-12));
}
