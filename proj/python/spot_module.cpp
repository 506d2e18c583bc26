#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "spot/orchestrator.hpp"

namespace py = pybind11;

namespace {

using NestedList = std::vector<std::vector<double>>;

spot::Matrix to_matrix(const NestedList& rows) {
    if (rows.empty()) return spot::Matrix();
    spot::Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols) throw spot::ShapeError("ragged row in matrix argument");
        for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = rows[i][j];
    }
    return m;
}

NestedList from_matrix(const spot::Matrix& m) {
    NestedList rows(m.rows, std::vector<double>(m.cols));
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) rows[i][j] = m(i, j);
    return rows;
}

std::vector<double> ema_smooth(const std::vector<double>& qs, double alpha) {
    spot::RewardTracker tracker;
    tracker.alpha = alpha;
    std::vector<double> out;
    for (std::size_t t = 0; t < qs.size(); ++t)
        out.push_back(spot::ema_reward(tracker, t + 1, qs[t]));
    return out;
}

py::dict run_experiment(const std::string& config_text) {
    const spot::ExperimentConfig cfg = spot::parse_config_text(config_text, "config");
    const spot::SuiteSummary suite = spot::run_experiment_suite(cfg, cfg.n_runs);
    py::dict out;
    out["zsl_mean"] = suite.zsl.mean;
    out["zsl_std"] = suite.zsl.std;
    out["seen_mean"] = suite.seen.mean;
    out["unseen_mean"] = suite.unseen.mean;
    out["harmonic_mean"] = suite.harmonic.mean;
    out["final_q_mean"] = suite.final_q.mean;
    py::list runs;
    for (const spot::RunResult& run : suite.runs) {
        py::dict r;
        r["seed"] = run.seed;
        r["zsl"] = run.metrics.zsl;
        r["seen"] = run.metrics.gzsl.seen;
        r["unseen"] = run.metrics.gzsl.unseen;
        r["harmonic"] = run.metrics.gzsl.harmonic;
        r["final_q"] = run.metrics.final_q_hat;
        r["keep_rate"] = run.metrics.keep_rate;
        r["episodes"] = run.logs.size();
        runs.append(r);
    }
    out["runs"] = runs;
    return out;
}

void gen_dataset(const std::string& config_text, const std::string& path) {
    const spot::ExperimentConfig cfg = spot::parse_config_text(config_text, "config");
    spot::save_dataset(spot::make_benchmark(cfg.benchmark), path);
}

}  // namespace

PYBIND11_MODULE(_spot, m) {
    m.doc() = "transformer-based synthetic feature selection pipeline";

    m.def("harmonic_mean", &spot::harmonic_mean, py::arg("s"), py::arg("u"),
          "2su/(s+u), defined as 0 when both are 0");
    m.def(
        "softmax_rows",
        [](const NestedList& rows) { return from_matrix(spot::softmax_rows(to_matrix(rows))); },
        py::arg("matrix"));
    m.def(
        "positional_encoding",
        [](std::size_t n, std::size_t d_model) {
            return from_matrix(spot::positional_encoding(n, d_model));
        },
        py::arg("n"), py::arg("d_model"));
    m.def(
        "attention",
        [](const NestedList& q, const NestedList& k, const NestedList& v) {
            const spot::AttentionResult res =
                spot::attention(to_matrix(q), to_matrix(k), to_matrix(v));
            return py::make_tuple(from_matrix(res.output), from_matrix(res.weights));
        },
        py::arg("q"), py::arg("k"), py::arg("v"), "returns (output, weights)");
    m.def("clipped_objective_term", &spot::clipped_objective_term, py::arg("ratio"),
          py::arg("advantage"), py::arg("epsilon"));
    m.def("ppo_loss", &spot::ppo_loss, py::arg("ratios"), py::arg("advantages"),
          py::arg("epsilon"));
    m.def("prob_ratio", &spot::prob_ratio, py::arg("new_log_probs"), py::arg("old_log_probs"));
    m.def("advantage", &spot::advantage, py::arg("q_hat"), py::arg("values"));
    m.def("ema_smooth", &ema_smooth, py::arg("rewards"), py::arg("alpha") = 0.5,
          "exponential moving average over a reward sequence");
    m.def("run_experiment", &run_experiment, py::arg("config_text"),
          "full train + evaluation suite from key=value config text");
    m.def("gen_dataset", &gen_dataset, py::arg("config_text"), py::arg("path"),
          "write a benchmark dataset (with companions) to path");
}
