// Command-line surface for model-based sparse coding: synthetic data,
// fitting, image denoising, recovery benchmarks and metric evaluation.

#include <CLI11.hpp>

#include <msc/baseline.hpp>
#include <msc/bench.hpp>
#include <msc/em.hpp>
#include <msc/io.hpp>
#include <msc/patch.hpp>
#include <msc/support.hpp>
#include <msc/synth.hpp>

#include <cstdio>
#include <iostream>

namespace {

using namespace msc;

struct SimulateArgs {
    std::string family;
    int n = 100, m = 100, K = 30, d = 2;
    double snr = 2.0, omega = 1.0 / 25.0;
    std::string kernel = "exp";
    std::uint64_t seed = 0;
    std::string out;
    bool raw_scale = false;
    bool snr_given = false;
};

int run_simulate(const SimulateArgs& a) {
    if (a.n < 1 || a.m < 1 || a.K < 1 || a.d < 1)
        throw std::invalid_argument("simulate: n, m, K, d must all be >= 1");
    if (a.family == "poisson" && a.snr_given)
        throw std::invalid_argument("simulate: --snr does not apply to the poisson family");

    SimSpec spec;
    spec.n = a.n;
    spec.m = a.m;
    spec.K = a.K;
    spec.d = a.d;
    spec.snr = a.snr;
    spec.omega = a.omega;
    spec.kernel = kernel_from_name(a.kernel);
    spec.seed = a.seed;
    spec.raw_scale = a.raw_scale;

    Dataset data;
    SimTruth truth;
    if (a.family == "poisson") {
        spec.family = Family::poisson;
        std::tie(data, truth) = simulate_poisson(spec);
    } else if (a.family == "spatial") {
        spec.family = Family::gaussian_spatial;
        std::tie(data, truth) = simulate_gaussian(spec);
    } else if (a.family == "gaussian") {
        spec.family = Family::gaussian_simple;
        std::tie(data, truth) = simulate_gaussian(spec);
    } else {
        throw std::invalid_argument("simulate: unknown family " + a.family);
    }

    std::vector<std::string> written;
    write_matrix(a.out + ".data.csv", data.X.transpose());  // one row per signal
    written.push_back(a.out + ".data.csv");
    if (data.locations) {
        write_matrix(a.out + ".loc.csv", *data.locations);
        written.push_back(a.out + ".loc.csv");
    }
    write_matrix(a.out + ".dict.csv", truth.dict.atoms);
    written.push_back(a.out + ".dict.csv");
    {
        std::ofstream f(a.out + ".supports.txt");
        for (const auto& g : truth.supports.masks) f << g.to_string() << "\n";
        written.push_back(a.out + ".supports.txt");
    }
    write_matrix(a.out + ".alpha.csv", truth.alpha);
    written.push_back(a.out + ".alpha.csv");
    {
        Mat assign(a.n, 1);
        for (int i = 0; i < a.n; ++i) assign(i, 0) = truth.assignment[i];
        write_matrix(a.out + ".assign.csv", assign);
        written.push_back(a.out + ".assign.csv");
    }
    std::cout << "seed=" << a.seed << "\n";
    for (const auto& p : written) std::cout << p << "\n";
    return 0;
}

struct FitArgs {
    std::string family = "gaussian";
    int K = 10, dmax = 2;
    std::string kernel = "exp";
    double c0 = 0.9, cmin = 1e-3, tol = 1e-6;
    int max_iter = 200;
    std::uint64_t seed = 0;
    std::string data, locations, out_model, trace;
    int threads = 1;
    int trials = 1;
    bool exhaustive = false;
};

int run_fit(const FitArgs& a) {
    Dataset data;
    data.X = read_matrix(a.data).transpose();  // rows on disk are signals
    if (!a.locations.empty()) {
        Mat loc = read_matrix(a.locations);
        if (loc.rows() != data.m())
            throw std::invalid_argument("fit: data has m=" + std::to_string(data.m()) +
                                        " but locations file has " + std::to_string(loc.rows()) +
                                        " rows");
        data.locations = loc;
    }

    FitConfig cfg;
    cfg.family = family_from_name(a.family);
    cfg.kernel = kernel_from_name(a.kernel);
    cfg.K = a.K;
    cfg.d_max = a.dmax;
    cfg.rc.c0 = a.c0;
    cfg.rc.c_min = a.cmin;
    cfg.tol = a.tol;
    cfg.max_iter = a.max_iter;
    cfg.seed = a.seed;
    cfg.threads = a.threads;
    cfg.trials = a.trials;
    cfg.exhaustive = a.exhaustive;

    if (cfg.family == Family::gaussian_spatial && !data.locations)
        throw std::invalid_argument("fit: --family spatial requires --locations");

    FitResult fit = fit_msc(data, cfg);

    std::cout << "chosen_d=" << fit.chosen_d << "\n";
    for (std::size_t d = 0; d < fit.bic_values.size(); ++d)
        std::cout << "bic_d" << (d + 1) << "=" << fmt_double(fit.bic_values[d]) << "\n";
    std::cout << "support_size=" << fit.state.J() << "\n";

    if (!a.out_model.empty()) {
        write_model(a.out_model, model_from_fit(fit, data.n()));
        std::cout << "model=" << a.out_model << "\n";
    }
    if (!a.trace.empty()) {
        std::ofstream f(a.trace);
        if (!f) throw io_error("cannot open for writing: " + a.trace);
        f << "record,d,iter,value\n";
        for (const auto& row : fit.trace)
            f << "loglik," << row.d << ',' << row.iter << ',' << fmt_double(row.loglik) << "\n";
        for (std::size_t d = 0; d < fit.bic_values.size(); ++d)
            f << "bic," << (d + 1) << ",0," << fmt_double(fit.bic_values[d]) << "\n";
        std::cout << "trace=" << a.trace << "\n";
    }
    return 0;
}

struct DenoiseArgs {
    std::string in, out;
    int patch = 12, stride = 3, K = 16, dmax = 2;
    std::string kernel = "exp";
    std::uint64_t seed = 0;
    bool hard = false;
    int threads = 1;
    int max_iter = 60;
    double tol = 1e-5;
};

int run_denoise(const DenoiseArgs& a) {
    PgmImage img = read_pgm(a.in);
    DenoiseConfig cfg;
    cfg.patch = a.patch;
    cfg.stride = a.stride;
    cfg.K = a.K;
    cfg.d_max = a.dmax;
    cfg.kernel = kernel_from_name(a.kernel);
    cfg.seed = a.seed;
    cfg.hard = a.hard;
    cfg.threads = a.threads;
    cfg.max_iter = a.max_iter;
    cfg.tol = a.tol;
    Mat denoised = denoise_image(img.to_matrix(), cfg);
    write_pgm(a.out, PgmImage::from_matrix(denoised));
    std::cout << "out=" << a.out << "\n";
    return 0;
}

struct BenchArgs {
    std::string suite = "gaussian-fig1";
    int replicates = 1;
    std::vector<int> sizes = {100};
    std::uint64_t seed = 0;
    std::string out;
    int threads = 1;
    int m = 40, K = 0, d = 2;
    double snr = 2.0;
    bool timing = false;
};

int run_bench_cmd(const BenchArgs& a) {
    BenchConfig cfg;
    cfg.suite = a.suite;
    cfg.replicates = a.replicates;
    cfg.sizes = a.sizes;
    cfg.seed = a.seed;
    cfg.threads = a.threads;
    cfg.m = a.m;
    cfg.K = a.K > 0 ? a.K : (a.suite == "poisson-fig1" ? 6 : 10);
    cfg.d = a.d;
    cfg.snr = a.snr;
    cfg.timing = a.timing;
    auto rows = run_bench(cfg);
    write_bench_csv(a.out, rows);
    std::cout << "report=" << a.out << " rows=" << rows.size() << "\n";
    return 0;
}

struct EvalArgs {
    std::string model, truth_dict, ref, test;
    double peak = 255.0;
};

int run_eval(const EvalArgs& a) {
    char buf[64];
    if (!a.model.empty() || !a.truth_dict.empty()) {
        if (a.model.empty() || a.truth_dict.empty())
            throw std::invalid_argument("eval: --model and --truth-dict go together");
        ModelFile mf = read_model(a.model);
        Mat truth = read_matrix(a.truth_dict);
        double d = subspace_distance(mf.dictionary, truth);
        std::snprintf(buf, sizeof(buf), "subspace_distance=%.6f", d);
        std::cout << buf << "\n";
        return 0;
    }
    if (a.ref.empty() || a.test.empty())
        throw std::invalid_argument("eval: need --model/--truth-dict or --ref/--test");
    Mat ref = read_pgm(a.ref).to_matrix();
    Mat test = read_pgm(a.test).to_matrix();
    if (ref.rows() != test.rows() || ref.cols() != test.cols())
        throw std::invalid_argument("eval: image shapes differ");
    double e = mse(ref, test);
    std::snprintf(buf, sizeof(buf), "mse=%.6f", e);
    std::cout << buf << "\n";
    double p = psnr(ref, test, a.peak);
    if (std::isinf(p))
        std::cout << "psnr=inf\n";
    else {
        std::snprintf(buf, sizeof(buf), "psnr=%.6f", p);
        std::cout << buf << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"model-based sparse coding"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* csim = app.add_subcommand("simulate", "generate synthetic mixture data");
    csim->add_option("--family", sim.family, "gaussian|spatial|poisson")->required();
    csim->add_option("--n", sim.n, "signals");
    csim->add_option("--m", sim.m, "signal dimension");
    csim->add_option("--K", sim.K, "atoms");
    csim->add_option("--d", sim.d, "true sparsity");
    auto* snr_opt = csim->add_option("--snr", sim.snr, "signal-to-noise ratio (Gaussian)");
    csim->add_option("--omega", sim.omega, "spatial correlation parameter");
    csim->add_option("--kernel", sim.kernel, "exp|gauss|ar");
    csim->add_option("--seed", sim.seed, "rng seed");
    csim->add_option("--out", sim.out, "output file prefix")->required();
    csim->add_flag("--raw-scale", sim.raw_scale, "poisson: keep literal U[1,10] coefficients");

    FitArgs fit;
    auto* cfit = app.add_subcommand("fit", "fit a d-sparse mixture model");
    cfit->add_option("--family", fit.family, "gaussian|spatial|poisson|binomial");
    cfit->add_option("--K", fit.K, "atoms");
    cfit->add_option("--dmax", fit.dmax, "maximum sparsity to try");
    cfit->add_option("--kernel", fit.kernel, "exp|gauss|ar");
    cfit->add_option("--c0", fit.c0, "rejection-control start threshold");
    cfit->add_option("--cmin", fit.cmin, "rejection-control floor");
    cfit->add_option("--tol", fit.tol, "relative log-likelihood tolerance");
    cfit->add_option("--max-iter", fit.max_iter, "EM iterations per sparsity level");
    cfit->add_option("--seed", fit.seed, "rng seed");
    cfit->add_option("--data", fit.data, "matrix file, one row per signal")->required();
    cfit->add_option("--locations", fit.locations, "matrix file of m location rows");
    cfit->add_option("--out-model", fit.out_model, "model output path");
    cfit->add_option("--trace", fit.trace, "per-iteration trace CSV path");
    cfit->add_option("--threads", fit.threads, "worker threads (1 = reference path)");
    cfit->add_option("--trials", fit.trials, "binomial trials");
    cfit->add_flag("--exhaustive", fit.exhaustive, "enumerate all supports (oracle mode)");

    DenoiseArgs den;
    auto* cden = app.add_subcommand("denoise", "patch-based image denoising");
    cden->add_option("--in", den.in, "input PGM")->required();
    cden->add_option("--out", den.out, "output PGM")->required();
    cden->add_option("--patch", den.patch, "patch side in pixels");
    cden->add_option("--stride", den.stride, "patch stride");
    cden->add_option("--K", den.K, "atoms");
    cden->add_option("--dmax", den.dmax, "maximum sparsity");
    cden->add_option("--kernel", den.kernel, "exp|gauss|ar");
    cden->add_option("--seed", den.seed, "rng seed");
    cden->add_flag("--hard", den.hard, "argmax reconstruction instead of posterior mean");
    cden->add_option("--threads", den.threads, "worker threads");
    cden->add_option("--max-iter", den.max_iter, "EM iterations per sparsity level");
    cden->add_option("--tol", den.tol, "relative log-likelihood tolerance");

    BenchArgs ben;
    auto* cben = app.add_subcommand("bench", "dictionary-recovery benchmark");
    cben->add_option("--suite", ben.suite, "gaussian-fig1|poisson-fig1");
    cben->add_option("--replicates", ben.replicates, "replicates per size");
    cben->add_option("--sizes", ben.sizes, "sample sizes")->delimiter(',');
    cben->add_option("--seed", ben.seed, "rng seed");
    cben->add_option("--out", ben.out, "report CSV path")->required();
    cben->add_option("--threads", ben.threads, "parallel replicates");
    cben->add_option("--m", ben.m, "signal dimension");
    cben->add_option("--K", ben.K, "atoms (0 = suite default)");
    cben->add_option("--d", ben.d, "true sparsity");
    cben->add_option("--snr", ben.snr, "signal-to-noise ratio");
    cben->add_flag("--timing", ben.timing, "record wall-clock times in the CSV");

    EvalArgs ev;
    auto* cev = app.add_subcommand("eval", "metrics: subspace distance or MSE/PSNR");
    cev->add_option("--model", ev.model, "fitted model file");
    cev->add_option("--truth-dict", ev.truth_dict, "true dictionary matrix file");
    cev->add_option("--ref", ev.ref, "reference PGM");
    cev->add_option("--test", ev.test, "test PGM");
    cev->add_option("--peak", ev.peak, "PSNR peak value");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (csim->parsed()) {
            sim.snr_given = snr_opt->count() > 0;
            return run_simulate(sim);
        }
        if (cfit->parsed()) return run_fit(fit);
        if (cden->parsed()) return run_denoise(den);
        if (cben->parsed()) return run_bench_cmd(ben);
        if (cev->parsed()) return run_eval(ev);
    } catch (const msc::numeric_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const msc::degenerate_signal_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
