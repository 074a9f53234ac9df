// Compares the OpenMP kernels against their serial reference counterparts:
// same outputs (checked bitwise), wall time side by side.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "acmap/backbone.hpp"
#include "acmap/classifier.hpp"
#include "acmap/numerics.hpp"
#include "acmap/rng.hpp"

using namespace acmap;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const auto start = Clock::now();
        fn();
        best = std::min(best,
                        std::chrono::duration<double, std::milli>(Clock::now() - start).count());
    }
    return best;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    Rng rng(seed);
    for (double& v : m.data()) v = rng.gaussian();
    return m;
}

void report(const char* name, double serial_ms, double parallel_ms, bool match) {
    std::printf("%-24s serial %9.3f ms   openmp %9.3f ms   speedup %5.2fx   %s\n", name,
                serial_ms, parallel_ms, serial_ms / parallel_ms,
                match ? "outputs match" : "OUTPUT MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t n = argc > 1 ? std::stoul(argv[1]) : 256;
    const int reps = argc > 2 ? std::stoi(argv[2]) : 5;
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (compiled without OpenMP)\n");
#endif

    // matmul
    const Matrix a = random_matrix(n, n, 1);
    const Matrix b = random_matrix(n, n, 2);
    Matrix c_serial, c_parallel;
    const double mm_serial = time_ms([&] { c_serial = ref::matmul(a, b); }, reps);
    const double mm_parallel = time_ms([&] { c_parallel = matmul(a, b, Exec::parallel); }, reps);
    report("matmul", mm_serial, mm_parallel, bitwise_equal(c_serial, c_parallel));

    // batched backbone features
    BackboneConfig cfg;
    cfg.input_dim = 64;
    cfg.embed_dim = 48;
    cfg.hidden_dim = 96;
    cfg.n_blocks = 4;
    const Backbone backbone(cfg);
    std::vector<Vector> inputs;
    Rng rng(3);
    for (std::size_t i = 0; i < 4 * n; ++i) {
        Vector x(cfg.input_dim);
        for (double& v : x) v = rng.gaussian();
        inputs.push_back(std::move(x));
    }
    Batch batch;
    for (const Vector& x : inputs) batch.push_back(SampleRef{&x, 0});
    const AdapterWeights adapter = init_adapter(cfg.n_blocks, cfg.embed_dim, 8, 0.1, nullptr, 4);
    Matrix f_serial, f_parallel;
    const double ft_serial = time_ms([&] { f_serial = ref::features(backbone, batch, &adapter); }, reps);
    const double ft_parallel =
        time_ms([&] { f_parallel = backbone.features(batch, &adapter, Exec::parallel); }, reps);
    report("batch features", ft_serial, ft_parallel, bitwise_equal(f_serial, f_parallel));

    // batched cosine prediction
    ClassifierWeights weights;
    weights.w = random_matrix(100, cfg.embed_dim, 5);
    for (std::uint32_t i = 0; i < 100; ++i) weights.class_ids.push_back(i);
    std::vector<std::uint32_t> p_serial, p_parallel;
    const double pr_serial = time_ms([&] { p_serial = ref::predict_batch(weights, f_serial); }, reps);
    const double pr_parallel =
        time_ms([&] { p_parallel = predict_batch(weights, f_parallel, Exec::parallel); }, reps);
    report("batch predict", pr_serial, pr_parallel, p_serial == p_parallel);
    return 0;
}
