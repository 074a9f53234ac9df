#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "acmap/harness.hpp"
#include "acmap/rng.hpp"

using namespace acmap;

namespace {

StreamSpec separable_spec(std::size_t tasks) {
    StreamSpec spec;
    spec.n_tasks = tasks;
    spec.base_classes = 3;
    spec.inc_classes = 3;
    spec.train_per_class = 25;
    spec.eval_per_class = 10;
    spec.input_dim = 12;
    spec.cluster_separation = 8.0;
    spec.noise_sigma = 0.5;
    spec.drift_model = DriftModel::none;
    spec.drift_rate = 0.0;
    spec.seed = 1993;
    return spec;
}

BackboneConfig small_backbone() {
    BackboneConfig cfg;
    cfg.input_dim = 12;
    cfg.embed_dim = 10;
    cfg.hidden_dim = 16;
    cfg.n_blocks = 2;
    cfg.seed = 42;
    return cfg;
}

TrainConfig quick_train() {
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 8;
    cfg.batch_size = 16;
    return cfg;
}

RunOptions options(std::uint64_t seed) {
    RunOptions opts;
    opts.seed = seed;
    opts.adapter.bottleneck = 4;
    return opts;
}

// everything except wall-clock milliseconds must reproduce bitwise
bool deterministic_equal(const RunReport& a, const RunReport& b) {
    if (a.method != b.method || a.seed != b.seed ||
        a.per_task_accuracy != b.per_task_accuracy || a.avg_accuracy != b.avg_accuracy ||
        a.final_accuracy != b.final_accuracy ||
        a.forward_passes_per_query != b.forward_passes_per_query ||
        a.data_access_violations != b.data_access_violations || a.aborted != b.aborted) {
        return false;
    }
    if (a.timing.size() != b.timing.size()) return false;
    for (std::size_t i = 0; i < a.timing.size(); ++i) {
        if (a.timing[i].eval_forward_passes != b.timing[i].eval_forward_passes) return false;
        if (a.timing[i].eval_queries != b.timing[i].eval_queries) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("compute_metrics basics") {
    const auto [avg, last] = compute_metrics({0.8, 0.6});
    CHECK(avg == 0.7);
    CHECK(last == 0.6);
    const auto [a1, l1] = compute_metrics({1.0});
    CHECK(a1 == 1.0);
    CHECK(l1 == 1.0);
    CHECK_THROWS_AS(compute_metrics({}), DataError);
    CHECK_THROWS_AS(compute_metrics({0.5, 1.5}), DataError);
}

TEST_CASE("compute_metrics matches a long-double compensated oracle") {
    Rng rng(3);
    std::vector<double> accs;
    for (int i = 0; i < 20; ++i) accs.push_back(rng.uniform());
    const auto [avg, last] = compute_metrics(accs);
    long double oracle = 0.0L;
    for (double a : accs) oracle += static_cast<long double>(a);
    oracle /= static_cast<long double>(accs.size());
    CHECK(std::abs(avg - double(oracle)) <= 1e-15);
    CHECK(last == accs.back());
}

TEST_CASE("single-task run: average equals the only accuracy") {
    TaskStream stream = generate_synthetic_stream(separable_spec(1));
    const RunArtifacts art =
        run_acmap(stream, small_backbone(), quick_train(), std::nullopt, true, true, options(1));
    REQUIRE(art.report.per_task_accuracy.size() == 1);
    CHECK(art.report.avg_accuracy == art.report.per_task_accuracy[0]);
    CHECK(art.report.final_accuracy == art.report.per_task_accuracy[0]);
    CHECK(art.report.forward_passes_per_query[0] == 1.0);
    CHECK(art.report.data_access_violations == 0);
}

TEST_CASE("drift-free separable stream stays above 0.95 final accuracy") {
    TaskStream stream = generate_synthetic_stream(separable_spec(5));
    const RunArtifacts art =
        run_acmap(stream, small_backbone(), quick_train(), std::nullopt, true, true, options(2));
    CHECK(art.report.final_accuracy >= 0.95);
    CHECK(art.report.data_access_violations == 0);

    TaskStream stream2 = generate_synthetic_stream(separable_spec(5));
    const RunArtifacts simple = run_simplecil(stream2, small_backbone(), options(2));
    CHECK(simple.report.final_accuracy >= 0.95);
}

TEST_CASE("simplecil runs one forward per query at every task") {
    TaskStream stream = generate_synthetic_stream(separable_spec(4));
    const RunArtifacts art = run_simplecil(stream, small_backbone(), options(3));
    for (double passes : art.report.forward_passes_per_query) CHECK(passes == 1.0);
    // cumulative eval: query counts grow by one task's eval split each phase
    const std::size_t per_task = 3 * 10;
    for (std::size_t t = 0; t < art.report.timing.size(); ++t)
        CHECK(art.report.timing[t].eval_queries == per_task * (t + 1));
}

TEST_CASE("identical config and seed give identical reports") {
    TaskStream s1 = generate_synthetic_stream(separable_spec(3));
    TaskStream s2 = generate_synthetic_stream(separable_spec(3));
    const RunArtifacts a =
        run_acmap(s1, small_backbone(), quick_train(), 2, true, true, options(4));
    const RunArtifacts b =
        run_acmap(s2, small_backbone(), quick_train(), 2, true, true, options(4));
    CHECK(deterministic_equal(a.report, b.report));

    TaskStream s3 = generate_synthetic_stream(separable_spec(3));
    const RunArtifacts c = run_simplecil(s3, small_backbone(), options(4));
    TaskStream s4 = generate_synthetic_stream(separable_spec(3));
    const RunArtifacts d = run_simplecil(s4, small_backbone(), options(4));
    CHECK(deterministic_equal(c.report, d.report));
}

TEST_CASE("ensemble at task 1 reproduces acmap at task 1") {
    TaskStream s1 = generate_synthetic_stream(separable_spec(1));
    TaskStream s2 = generate_synthetic_stream(separable_spec(1));
    const RunArtifacts a =
        run_acmap(s1, small_backbone(), quick_train(), std::nullopt, true, true, options(5));
    const RunArtifacts e =
        run_ensemble_baseline(s2, small_backbone(), quick_train(), options(5));
    CHECK(a.report.per_task_accuracy == e.report.per_task_accuracy);
    // both trained the same adapter from the same init and seed
    CHECK(bitwise_equal(a.store.get(1, 1).rows, e.store.get(1, 1).rows));
}

TEST_CASE("ensemble forward passes grow as t while acmap stays at 1") {
    TaskStream s1 = generate_synthetic_stream(separable_spec(5));
    TaskStream s2 = generate_synthetic_stream(separable_spec(5));
    const RunArtifacts a =
        run_acmap(s1, small_backbone(), quick_train(), std::nullopt, true, true, options(6));
    const RunArtifacts e =
        run_ensemble_baseline(s2, small_backbone(), quick_train(), options(6));
    for (std::size_t t = 0; t < 5; ++t) {
        CHECK(a.report.forward_passes_per_query[t] == 1.0);
        CHECK(e.report.forward_passes_per_query[t] == double(t + 1));
        // exact integer ratio, not a wall-clock artifact
        CHECK(e.report.timing[t].eval_forward_passes ==
              (t + 1) * e.report.timing[t].eval_queries);
    }
    CHECK(e.report.data_access_violations == 0);
}

TEST_CASE("early stop freezes training and the merged adapter") {
    TaskStream stream = generate_synthetic_stream(separable_spec(6));
    const RunArtifacts art =
        run_acmap(stream, small_backbone(), quick_train(), 3, true, true, options(7));
    REQUIRE(art.trail.has_value());
    CHECK(art.trail->snapshot_count() == 3);
    CHECK(art.trail->merge_count() == 6);
    // tasks beyond the threshold never trained: no train time recorded
    for (std::size_t t = 3; t < 6; ++t) CHECK(art.report.timing[t].train_ms == 0.0);
    // later tasks' prototypes live directly in the frozen subspace
    CHECK(art.store.get(5, 3).adapter_tag == 3);
    CHECK_FALSE(art.store.get(5, 3).mapped);
    CHECK(art.store.get(1, 3).mapped);
}

TEST_CASE("no-cm runs keep stale prototypes and still report") {
    TaskStream stream = generate_synthetic_stream(separable_spec(3));
    const RunArtifacts art =
        run_acmap(stream, small_backbone(), quick_train(), std::nullopt, true, false, options(8));
    CHECK(art.report.method == "acmap_no_cm");
    CHECK(art.store.find(1, 3) == nullptr);  // never mapped
    CHECK(art.store.find(1, 1) != nullptr);
    CHECK(art.report.per_task_accuracy.size() == 3);
}

TEST_CASE("divergence aborts with a partial report") {
    TaskStream stream = generate_synthetic_stream(separable_spec(3));
    TrainConfig bad = quick_train();
    bad.learning_rate = 1e12;
    const RunArtifacts art =
        run_acmap(stream, small_backbone(), bad, std::nullopt, true, true, options(9));
    CHECK(art.report.aborted);
    CHECK(!art.report.abort_reason.empty());
    CHECK(art.report.per_task_accuracy.empty());
}

TEST_CASE("method names round trip") {
    for (Method m : {Method::acmap, Method::acmap_no_ir, Method::acmap_no_cm, Method::simplecil,
                     Method::ensemble}) {
        CHECK(parse_method(method_name(m)) == m);
    }
    CHECK_THROWS_AS(parse_method("nope"), ConfigError);
}
