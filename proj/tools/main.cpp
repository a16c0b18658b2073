// Command-line surface for the curvature / robustness pipelines.
//
// Every subcommand writes its CSV artifacts plus a run manifest into the
// output directory. All randomness flows from the configured seeds, so two
// runs with the same config produce byte-identical outputs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sharplab/analysis.hpp"
#include "sharplab/config.hpp"
#include "sharplab/curvature.hpp"
#include "sharplab/data.hpp"
#include "sharplab/fdcheck.hpp"
#include "sharplab/model_io.hpp"
#include "sharplab/network.hpp"
#include "sharplab/robustness.hpp"

namespace fs = std::filesystem;
using namespace sharplab;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Out {
    fs::path dir;
    std::ofstream open(const std::string& name) {
        fs::create_directories(dir);
        std::ofstream f(dir / name);
        if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
        return f;
    }
};

void write_manifest(Out& out, const std::string& subcommand, const RunConfig& cfg) {
    auto f = out.open("manifest.txt");
    f << "tool = sharplab " << kVersion << "\n"
      << "subcommand = " << subcommand << "\n"
      << "global_seed = " << cfg.seed << "\n\n"
      << config_to_text(cfg);
}

std::vector<std::size_t> model_dims(const RunConfig& cfg) {
    std::vector<std::size_t> dims;
    dims.push_back(cfg.dataset.kind == DatasetKind::idx ? 784 : cfg.dataset.dim);
    for (std::size_t h : cfg.hidden_dims) dims.push_back(h);
    dims.push_back(cfg.dataset.classes);
    return dims;
}

/// Load <out>/model.json when present, otherwise train one deterministically
/// from the config and save it there.
MlpNetwork obtain_model(const RunConfig& cfg, Out& out, const SampleBatch& train_data) {
    const fs::path model_path = out.dir / "model.json";
    if (fs::exists(model_path)) return load_model(model_path.string());
    MlpNetwork init = MlpNetwork::random(model_dims(cfg), SeededRng(cfg.seed, 0x1017ULL));
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed ^ tc.seed;
    const TrainResult res = train_sgd(init, train_data, tc);
    fs::create_directories(out.dir);
    save_model(res.net, model_path.string());
    return res.net;
}

void write_batch_csv(Out& out, const std::string& name, const SampleBatch& batch) {
    auto f = out.open(name);
    f << "label";
    for (std::size_t j = 0; j < batch.inputs.cols(); ++j) f << ",x" << j;
    f << "\n";
    for (std::size_t i = 0; i < batch.size(); ++i) {
        f << batch.labels[i];
        for (std::size_t j = 0; j < batch.inputs.cols(); ++j)
            f << "," << fmt(batch.inputs(i, j));
        f << "\n";
    }
}

void write_trajectories_csv(Out& out, const std::vector<AttackTrajectory>& trajs) {
    auto f = out.open("trajectories.csv");
    f << "sample_id,iteration,loss,predicted_class,confidence,kappa_spectral,"
         "kappa_frobenius,l2_dist_from_clean\n";
    for (const auto& traj : trajs)
        for (std::size_t t = 0; t < traj.points.size(); ++t) {
            const auto& p = traj.points[t];
            f << traj.sample_id << "," << t << "," << fmt(p.loss) << "," << p.predicted << ","
              << fmt(p.confidence) << "," << fmt(p.kappa_spectral) << ","
              << fmt(p.kappa_frobenius) << "," << fmt(p.l2_dist_from_clean) << "\n";
        }
}

void write_histogram_csv(Out& out, const std::string& name, const std::vector<double>& values) {
    auto f = out.open(name);
    f << "bin_left,bin_right,count\n";
    for (const auto& bin : histogram(values))
        f << fmt(bin.left) << "," << fmt(bin.right) << "," << bin.count << "\n";
}

int cmd_gen_data(const RunConfig& cfg, Out& out) {
    const SplitBatch split = gen_synthetic(cfg.dataset);
    write_batch_csv(out, "train.csv", split.train);
    write_batch_csv(out, "test.csv", split.test);
    write_manifest(out, "gen-data", cfg);
    std::cout << "wrote " << split.train.size() << " train / " << split.test.size()
              << " test samples to " << out.dir.string() << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, Out& out) {
    const SplitBatch split = gen_synthetic(cfg.dataset);
    MlpNetwork init = MlpNetwork::random(model_dims(cfg), SeededRng(cfg.seed, 0x1017ULL));
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed ^ tc.seed;
    const TrainResult res = train_sgd(init, split.train, tc);
    fs::create_directories(out.dir);
    save_model(res.net, (out.dir / "model.json").string());
    auto f = out.open("loss_curve.csv");
    f << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < res.loss_curve.size(); ++e)
        f << e << "," << fmt(res.loss_curve[e]) << "\n";
    write_manifest(out, "train", cfg);
    std::cout << "train accuracy " << fmt(accuracy(res.net, split.train)) << ", test accuracy "
              << fmt(accuracy(res.net, split.test)) << "\n";
    return 0;
}

int cmd_attack(const RunConfig& cfg, Out& out) {
    const SplitBatch split = gen_synthetic(cfg.dataset);
    const MlpNetwork net = obtain_model(cfg, out, split.train);
    const auto trajs = pgd_attack(net, split.test, cfg.attack);
    write_trajectories_csv(out, trajs);
    const TrajectoryMetrics metrics = trajectory_metrics(trajs);
    std::vector<double> increases;
    for (const auto& t : metrics.per_trajectory) increases.push_back(t.loss_increase);
    write_histogram_csv(out, "loss_increase_hist.csv", increases);
    auto f = out.open("summary.txt");
    f << "samples = " << trajs.size() << "\n"
      << "flipped = " << metrics.flipped_count << "\n"
      << "peak_then_decay_fraction_of_flipped = " << fmt(metrics.peak_then_decay_fraction)
      << "\n";
    write_manifest(out, "attack", cfg);
    return 0;
}

int cmd_sharpness(const RunConfig& cfg, Out& out, bool per_layer) {
    const SplitBatch split = gen_synthetic(cfg.dataset);
    const MlpNetwork net = obtain_model(cfg, out, split.train);
    const SharpnessReport report = relative_sharpness(net, split.test);
    auto f = out.open("sharpness.csv");
    f << "sample_id,loss,confidence,kappa_spectral,kappa_frobenius,layer,trace_estimate\n";
    const std::size_t clf_layer = net.layers().size() - 1;
    for (std::size_t i = 0; i < report.per_sample.size(); ++i) {
        const auto& rec = report.per_sample[i];
        if (!per_layer) {
            const double tr =
                rec.kappa_frobenius /
                std::max(1e-300, std::pow(net.classifier().frobenius_norm(), 2.0));
            f << rec.sample_id << "," << fmt(rec.loss) << "," << fmt(rec.confidence) << ","
              << fmt(rec.kappa_spectral) << "," << fmt(rec.kappa_frobenius) << "," << clf_layer
              << "," << fmt(tr) << "\n";
        } else {
            const BackpropResult bp =
                hessian_backprop(net, split.test.input(i), split.test.labels[i]);
            for (std::size_t l = 0; l < bp.layers.size(); ++l) {
                const Matrix& h = bp.layers[l].weight_hessian;
                const double est = hutchinson_trace(
                    [&](const Vector& z) { return h * z; }, h.rows(), 64,
                    SeededRng(cfg.seed, 0x7a0ceULL).derive(i * 131 + l));
                f << rec.sample_id << "," << fmt(rec.loss) << "," << fmt(rec.confidence) << ","
                  << fmt(rec.kappa_spectral) << "," << fmt(rec.kappa_frobenius) << "," << l
                  << "," << fmt(est) << "\n";
            }
        }
    }
    write_manifest(out, "sharpness", cfg);
    std::cout << "mean kappa_spectral = " << fmt(report.mean_kappa_spectral) << "\n";
    return 0;
}

int cmd_certify(const RunConfig& cfg, Out& out) {
    const SplitBatch split = gen_synthetic(cfg.dataset);
    const MlpNetwork net = obtain_model(cfg, out, split.train);
    const LipschitzEstimate lip = lipschitz_estimate(net, split.train, 2000, cfg.seed);
    const FeatureNormReport fnr = min_feature_norm(net, split.test);
    const double w_frob = net.classifier().frobenius_norm();

    auto f = out.open("certificates.csv");
    f << "sample_id,kappa_frobenius,L,r,epsilon,delta_cert,cubic_residual\n";
    std::size_t refused = 0;
    for (std::size_t i = 0; i < split.test.size(); ++i) {
        const SharpnessRecord rec = sample_sharpness(net, split.test.input(i),
                                                     split.test.labels[i], i, 1.0,
                                                     w_frob * w_frob);
        const double r_i = norm2(net.features(split.test.input(i)));
        if (r_i < kFeatureNormFloor) {
            // hypothesis ||phi(x)|| >= r violated; refusal row
            ++refused;
            f << i << "," << fmt(rec.kappa_frobenius) << "," << fmt(lip.upper) << ","
              << fmt(r_i) << "," << fmt(cfg.certify_epsilon) << ",nan,nan\n";
            continue;
        }
        const Certificate cert =
            certified_radius(cfg.certify_epsilon, rec.kappa_frobenius, net.num_classes(),
                             net.feature_dim(), lip.upper, fnr.r);
        f << i << "," << fmt(rec.kappa_frobenius) << "," << fmt(lip.upper) << "," << fmt(fnr.r)
          << "," << fmt(cfg.certify_epsilon) << "," << fmt(cert.delta_cert) << ","
          << fmt(cert.cubic_residual) << "\n";
    }
    auto s = out.open("summary.txt");
    s << "L_upper = " << fmt(lip.upper) << "\n"
      << "L_lower_empirical = " << fmt(lip.lower_empirical) << "\n"
      << "r = " << fmt(fnr.r) << "\n"
      << "refused = " << refused << "\n";
    write_manifest(out, "certify", cfg);
    return 0;
}

int cmd_sweep_scale(const RunConfig& cfg, Out& out) {
    const SplitBatch split = gen_synthetic(cfg.dataset);
    const MlpNetwork net = obtain_model(cfg, out, split.train);
    const ScaleSweepResult sweep = scale_sweep(net, cfg.scales, cfg.attack, split.test);
    auto f = out.open("sweep.csv");
    f << "s,clean_accuracy,robust_accuracy,mean_kappa_spectral,mean_kappa_frobenius,"
         "transfer_rate\n";
    for (const auto& e : sweep.entries)
        f << fmt(e.s) << "," << fmt(e.clean_accuracy) << "," << fmt(e.robust_accuracy) << ","
          << fmt(e.mean_kappa_spectral) << "," << fmt(e.mean_kappa_frobenius) << ","
          << fmt(e.transfer_rate) << "\n";
    write_manifest(out, "sweep-scale", cfg);
    return 0;
}

int cmd_basin(const RunConfig& cfg, Out& out) {
    const SplitBatch split = gen_synthetic(cfg.dataset);
    const MlpNetwork net = obtain_model(cfg, out, split.train);
    const auto trajs = pgd_attack(net, split.test, cfg.attack);
    const BasinReport report = basin_report(trajs, cfg.take_off_tau);
    auto f = out.open("basin.csv");
    f << "sample_id,take_off,width,kappa_at_clean\n";
    for (const auto& s : report.samples) {
        f << s.sample_id << ",";
        if (s.take_off_iter)
            f << *s.take_off_iter << "," << *s.take_off_iter;
        else
            f << "none,nan";
        f << "," << fmt(s.kappa_at_clean) << "\n";
    }
    auto s = out.open("summary.txt");
    if (report.spearman)
        s << "spearman_kappa_width = " << fmt(*report.spearman)
          << (report.all_tied ? " (all tied)" : "") << "\n";
    else
        s << "spearman_kappa_width = undefined (fewer than 3 take-offs)\n";
    write_manifest(out, "basin", cfg);
    return 0;
}

int cmd_detect(const RunConfig& cfg, Out& out) {
    const SplitBatch split = gen_synthetic(cfg.dataset);
    const MlpNetwork net = obtain_model(cfg, out, split.train);
    const SharpnessReport clean = relative_sharpness(net, split.test);
    const auto trajs = pgd_attack(net, split.test, cfg.attack);

    std::vector<double> values;
    std::vector<int> labels;
    for (const auto& rec : clean.per_sample) {
        values.push_back(rec.kappa_spectral);
        labels.push_back(0);
    }
    for (const auto& traj : trajs)
        if (traj.flipped()) {
            values.push_back(traj.points.back().kappa_spectral);
            labels.push_back(1);
        }
    const DetectorResult det = stump_detector_cv(values, labels, cfg.detector_folds, cfg.seed);
    auto f = out.open("detect.csv");
    f << "fold,accuracy\n";
    for (std::size_t i = 0; i < det.fold_accuracies.size(); ++i)
        f << i << "," << fmt(det.fold_accuracies[i]) << "\n";
    auto s = out.open("summary.txt");
    s << "mean_accuracy = " << fmt(det.mean_accuracy) << "\n"
      << "adversarial_count = " << std::count(labels.begin(), labels.end(), 1) << "\n";
    write_manifest(out, "detect", cfg);
    return 0;
}

int cmd_collapse(const RunConfig& cfg, Out& out) {
    const SplitBatch split = gen_synthetic(cfg.dataset);
    const MlpNetwork net = obtain_model(cfg, out, split.train);
    const std::vector<double> alphas = {1, 2, 4, 8, 16, 32, 64};
    const CollapseCurve curve = collapse_curve(net, split.test, alphas);
    auto f = out.open("collapse.csv");
    f << "alpha,mean_trace,mean_kappa_spectral,mean_kappa_frobenius\n";
    for (std::size_t a = 0; a < curve.alphas.size(); ++a)
        f << fmt(curve.alphas[a]) << "," << fmt(curve.mean_trace[a]) << ","
          << fmt(curve.mean_kappa_spectral[a]) << "," << fmt(curve.mean_kappa_frobenius[a])
          << "\n";
    // envelope audit: per-sample bound tr H_ce(alpha) <= 2(k-1) exp(-alpha margin)
    std::size_t violations = 0;
    const double k1 = 2.0 * (static_cast<double>(net.num_classes()) - 1.0);
    for (const auto& s : curve.samples)
        for (std::size_t a = 0; a < curve.alphas.size(); ++a)
            if (s.trace[a] > k1 * std::exp(-curve.alphas[a] * s.margin) + 1e-12) ++violations;
    auto sum = out.open("summary.txt");
    sum << "samples_kept = " << curve.samples.size() << "\n"
        << "excluded_nonpositive_margin = " << curve.excluded_nonpositive_margin << "\n"
        << "envelope_violations = " << violations << "\n";
    write_manifest(out, "collapse", cfg);
    return violations == 0 ? 0 : 1;
}

int cmd_hessian_check(const RunConfig& cfg, Out& out) {
    const FdCheckReport report = run_fd_check_suite(cfg.seed);
    auto print = [&](std::ostream& os) {
        auto row = [&](const char* name, double err, double tol) {
            os << (err < tol ? "PASS" : "FAIL") << "  " << name << "  max_rel_err=" << fmt(err)
               << "  tol=" << fmt(tol) << "\n";
        };
        row("classifier_hessian_vs_fd", report.max_rel_err_classifier_hessian, 1e-4);
        row("layer_gradients_vs_fd", report.max_rel_err_layer_gradients, 1e-4);
        row("backprop_blocks_vs_fd", report.max_rel_err_backprop_blocks, 1e-3);
        row("third_derivative_vs_fd", report.max_rel_err_third_derivative, 1e-3);
        os << "skipped_near_kink = " << report.skipped_near_kink << "\n";
    };
    print(std::cout);
    auto f = out.open("hessian_check.txt");
    print(f);
    write_manifest(out, "hessian-check", cfg);
    return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"curvature and robustness laboratory for small ReLU classifiers"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir, norm_override, scales_override;
    std::uint64_t seed = 0;
    bool seed_set = false, per_layer = false;
    double eps = 0.0, alpha = 0.0, tau = 0.0;
    std::size_t steps = 0, folds = 0;

    app.add_option("--config", config_path, "path to an INI run configuration");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "global seed override")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--steps", steps, "attack steps override");
    app.add_option("--eps", eps, "attack / certificate epsilon override");
    app.add_option("--alpha", alpha, "attack step size override");
    app.add_option("--norm", norm_override, "attack norm override (l2|linf)");
    app.add_option("--scales", scales_override, "comma-separated scale list override");
    app.add_option("--tau", tau, "take-off threshold override");
    app.add_option("--folds", folds, "detector fold count override");
    app.add_flag("--per-layer", per_layer, "per-layer sharpness rows (sharpness only)");

    for (const char* name : {"gen-data", "train", "attack", "sharpness", "certify",
                             "sweep-scale", "basin", "detect", "collapse", "hessian-check"})
        app.add_subcommand(name);

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : parse_config_file(config_path);
        if (seed_set) cfg.seed = seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (steps > 0) cfg.attack.steps = steps;
        if (eps > 0.0) {
            cfg.attack.epsilon = eps;
            cfg.certify_epsilon = eps;
        }
        if (alpha > 0.0) cfg.attack.step_size = alpha;
        if (!norm_override.empty())
            cfg.attack.norm = norm_override == "linf" ? AttackNorm::linf : AttackNorm::l2;
        if (!scales_override.empty()) cfg.scales = parse_double_list(scales_override);
        if (tau > 0.0) cfg.take_off_tau = tau;
        if (folds > 0) cfg.detector_folds = folds;

        Out out{fs::path(cfg.out_dir)};
        const std::string sub = app.get_subcommands().front()->get_name();
        if (sub == "gen-data") return cmd_gen_data(cfg, out);
        if (sub == "train") return cmd_train(cfg, out);
        if (sub == "attack") return cmd_attack(cfg, out);
        if (sub == "sharpness") return cmd_sharpness(cfg, out, per_layer);
        if (sub == "certify") return cmd_certify(cfg, out);
        if (sub == "sweep-scale") return cmd_sweep_scale(cfg, out);
        if (sub == "basin") return cmd_basin(cfg, out);
        if (sub == "detect") return cmd_detect(cfg, out);
        if (sub == "collapse") return cmd_collapse(cfg, out);
        if (sub == "hessian-check") return cmd_hessian_check(cfg, out);
        std::cerr << "unknown subcommand " << sub << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
