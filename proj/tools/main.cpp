#include <CLI11.hpp>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "latentfuse/alternating.hpp"
#include "latentfuse/errors.hpp"
#include "latentfuse/io.hpp"
#include "latentfuse/specific.hpp"
#include "latentfuse/synthetic.hpp"
#include "latentfuse/timeseries.hpp"
#include "latentfuse/types.hpp"
#include "latentfuse/validation.hpp"

namespace {

using namespace latentfuse;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

/// Column names c1..cd for a d-column embedding CSV.
std::vector<std::string> coord_columns(Eigen::Index d, const std::string& prefix = "c") {
    std::vector<std::string> cols;
    for (Eigen::Index j = 0; j < d; ++j) cols.push_back(prefix + std::to_string(j + 1));
    return cols;
}

void prepare_out_dir(const std::string& out) {
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec)
        throw FormatError("cannot create output directory '" + out + "': " + ec.message());
}

/// Per-row angle of the first two embedding coordinates.
Eigen::VectorXd embedding_angles(const Embedding& e) {
    if (e.coords.cols() < 2)
        throw ParameterError("angle extraction needs an embedding dimension of at least 2");
    Eigen::VectorXd theta(e.coords.rows());
    for (Eigen::Index i = 0; i < theta.size(); ++i)
        theta(i) = std::atan2(e.coords(i, 1), e.coords(i, 0));
    return theta;
}

struct ToriOpts {
    long n = 3000;
    std::uint64_t seed = 42;
    int q = 11;
    int d = 2;
    std::string out = ".";
    double R = 10.0, r1 = 4.0, r2 = 2.0;
    int k = 16;
    int m = 1;
    int m_ad = 2;
    double tau = 1e-2;
    std::string deltas = "raw";
};

int run_tori(const ToriOpts& o) {
    prepare_out_dir(o.out);
    const TorusParams geom{o.R, o.r1, o.r2};
    const auto [s1, s2] = generate_tori_dataset(o.n, o.seed, geom);

    PipelineParams pp;
    pp.scale_k = o.k;
    pp.ad_power = o.m_ad;
    pp.map_power = o.m;
    pp.dim = o.d;
    SpecificParams sp;
    sp.q = o.q;
    sp.rank_policy.tau = o.tau;
    sp.center_offsets = (o.deltas == "centered");

    const Embedding xhat = common_embedding(s1, s2, pp);
    const Embedding yhat = specific_embedding(s1, xhat, sp, pp);
    const Embedding zhat = specific_embedding(s2, xhat, sp, pp);

    const auto dir = std::filesystem::path(o.out);
    write_matrix_csv((dir / "s1.csv").string(), s1.data, coord_columns(3));
    write_matrix_csv((dir / "s2.csv").string(), s2.data, coord_columns(3));
    Eigen::MatrixXd truth(o.n, 3);
    truth.col(0) = s1.hidden_truth->col(0);
    truth.col(1) = s1.hidden_truth->col(1);
    truth.col(2) = s2.hidden_truth->col(1);
    write_matrix_csv((dir / "truth.csv").string(), truth, {"x", "y", "z"});
    write_matrix_csv((dir / "xhat.csv").string(), xhat.coords, coord_columns(o.d));
    write_matrix_csv((dir / "yhat.csv").string(), yhat.coords, coord_columns(o.d));
    write_matrix_csv((dir / "zhat.csv").string(), zhat.coords, coord_columns(o.d));

    const double two_pi = 2.0 * std::numbers::pi;
    const double cx = circular_correlation(embedding_angles(xhat), two_pi * truth.col(0));
    const double cy = circular_correlation(embedding_angles(yhat), two_pi * truth.col(1));
    const double cz = circular_correlation(embedding_angles(zhat), two_pi * truth.col(2));

    std::ofstream report(dir / "report.txt");
    if (!report)
        throw FormatError("cannot write report in '" + o.out + "'");
    report << "n " << o.n << "\nseed " << o.seed << "\nq " << o.q << "\n";
    report << "corr_x " << format_double(cx) << "\n";
    report << "corr_y " << format_double(cy) << "\n";
    report << "corr_z " << format_double(cz) << "\n";
    report.close();
    std::cout << "corr_x " << format_double(cx) << "\ncorr_y " << format_double(cy)
              << "\ncorr_z " << format_double(cz) << "\n";
    return kExitOk;
}

struct FuseOpts {
    std::string input;
    int seg_len = 256;
    int overlap = 16;
    std::optional<int> hop;
    int q = 21;
    int d = 2;
    int m_ad = 1;
    int m = 1;
    int k = 16;
    double tau = 1e-2;
    std::optional<double> rate;
    std::string out = ".";
    std::string deltas = "centered";
};

int run_fuse(const FuseOpts& o) {
    prepare_out_dir(o.out);
    const TwoChannel tc = load_two_channel_csv(o.input);
    std::optional<double> rate = o.rate ? o.rate : tc.sample_rate;

    const int overlap = o.hop ? o.seg_len - *o.hop : o.overlap;
    SampleSet s1 = lag_map(tc.ch1, o.seg_len, overlap);
    SampleSet s2 = lag_map(tc.ch2, o.seg_len, overlap);
    s1.sensor_id = 1;
    s2.sensor_id = 2;

    PipelineParams pp;
    pp.scale_k = o.k;
    pp.ad_power = o.m_ad;
    pp.map_power = o.m;
    pp.dim = o.d;
    SpecificParams sp;
    sp.q = o.q;
    sp.rank_policy.tau = o.tau;
    sp.center_offsets = (o.deltas == "centered");

    const Embedding xhat = common_embedding(s1, s2, pp);
    const Embedding yhat = specific_embedding(s1, xhat, sp, pp);
    const Embedding zhat = specific_embedding(s2, xhat, sp, pp);

    const auto dir = std::filesystem::path(o.out);
    write_matrix_csv((dir / "xhat.csv").string(), xhat.coords, coord_columns(o.d));
    write_matrix_csv((dir / "yhat.csv").string(), yhat.coords, coord_columns(o.d));
    write_matrix_csv((dir / "zhat.csv").string(), zhat.coords, coord_columns(o.d));

    // One row per original sample, colored by the embedding of the
    // segment whose center lies nearest; plot-ready without resampling.
    const Eigen::Index len = tc.ch1.size();
    const Eigen::Index hop = o.seg_len - overlap;
    const Eigen::Index count = xhat.coords.rows();
    const double half = (o.seg_len - 1) / 2.0;
    Eigen::MatrixXd colored(len, 2 + 3 * o.d);
    for (Eigen::Index i = 0; i < len; ++i) {
        const auto seg = static_cast<Eigen::Index>(std::clamp(
            std::llround((static_cast<double>(i) - half) / static_cast<double>(hop)),
            static_cast<long long>(0), static_cast<long long>(count - 1)));
        colored(i, 0) = static_cast<double>(i);
        colored(i, 1) = rate ? static_cast<double>(i) / *rate : static_cast<double>(i);
        colored.block(i, 2, 1, o.d) = xhat.coords.row(seg);
        colored.block(i, 2 + o.d, 1, o.d) = yhat.coords.row(seg);
        colored.block(i, 2 + 2 * o.d, 1, o.d) = zhat.coords.row(seg);
    }
    std::vector<std::string> cols = {"index", "t"};
    for (const auto& c : coord_columns(o.d, "x")) cols.push_back(c);
    for (const auto& c : coord_columns(o.d, "y")) cols.push_back(c);
    for (const auto& c : coord_columns(o.d, "z")) cols.push_back(c);
    write_matrix_csv((dir / "colored_signal.csv").string(), colored, cols);

    std::cout << "segments " << count << "\n";
    return kExitOk;
}

struct ValidateOpts {
    std::string suite = "all";
    int trials = 20;
    std::uint64_t seed = 7;
};

int run_validate(const ValidateOpts& o) {
    const std::vector<double> single{1e-2};
    const std::vector<double> sweep{1e-2, 5e-3, 2.5e-3};
    bool ok = true;

    if (o.suite == "thm1" || o.suite == "all") {
        const TheoremReport lin = check_theorem1(GKind::linear, single, o.trials, o.seed);
        std::cout << format_report(lin);
        const bool lin_ok = lin.max_error <= 1e-10;
        std::cout << "threshold max_error<=1e-10 " << (lin_ok ? "pass" : "FAIL") << "\n\n";

        const TheoremReport tor = check_theorem1(GKind::torus, sweep, o.trials, o.seed);
        std::cout << format_report(tor);
        const bool tor_ok = tor.mean_slope >= 2.5 && tor.mean_slope <= 3.5;
        std::cout << "threshold mean_slope in [2.5,3.5] " << (tor_ok ? "pass" : "FAIL")
                  << "\n\n";
        ok = ok && lin_ok && tor_ok;
    }
    if (o.suite == "thm2" || o.suite == "all") {
        const TheoremReport lin = check_theorem2(GKind::linear, single, o.trials, o.seed);
        std::cout << format_report(lin);
        const bool lin_ok = lin.max_error <= 1e-8;
        std::cout << "threshold max_error<=1e-8 " << (lin_ok ? "pass" : "FAIL") << "\n\n";

        const TheoremReport tor = check_theorem2(GKind::torus, sweep, o.trials, o.seed);
        std::cout << format_report(tor);
        const bool tor_ok = tor.mean_slope >= 2.5;
        std::cout << "threshold mean_slope>=2.5 " << (tor_ok ? "pass" : "FAIL") << "\n\n";
        ok = ok && lin_ok && tor_ok;
    }
    return ok ? kExitOk : kExitNumerical;
}

/// Replaces `--config FILE` with the file's key=value pairs, injected
/// right after the subcommand token so explicit flags still win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size();) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            args.erase(args.begin() + static_cast<long>(i),
                       args.begin() + static_cast<long>(i) + 2);
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<long>(i));
        } else {
            ++i;
        }
    }
    if (path.empty()) return args;

    std::ifstream in(path);
    if (!in)
        throw ParameterError("cannot open config file '" + path + "'");
    std::vector<std::string> injected;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ParameterError("config line " + std::to_string(line_no) +
                                 ": expected key=value");
        injected.push_back("--" + detail::trim(t.substr(0, eq)));
        injected.push_back(detail::trim(t.substr(eq + 1)));
    }

    static const std::vector<std::string> subs{"tori", "fuse", "validate"};
    const auto pos = std::find_first_of(args.begin(), args.end(), subs.begin(), subs.end());
    if (pos == args.end())
        throw ParameterError("--config requires a subcommand");
    args.insert(pos + 1, injected.begin(), injected.end());
    return args;
}

template <typename F>
int run_guarded(F&& f) {
    try {
        return f();
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InvalidInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latentfuse: multimodal latent variable extraction"};
    app.require_subcommand(1);
    // Repeated options keep the last value, so config-injected tokens
    // are overridden by flags typed after them.
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    int threads = 1;
    app.add_option("--threads", threads, "worker thread cap")
        ->envname("LATENTFUSE_THREADS")
        ->check(CLI::PositiveNumber);

    ToriOpts tori;
    CLI::App* tori_cmd = app.add_subcommand("tori", "two-torus synthetic experiment");
    tori_cmd->add_option("--n", tori.n, "sample count")->capture_default_str();
    tori_cmd->add_option("--seed", tori.seed, "rng seed")->capture_default_str();
    tori_cmd->add_option("--q", tori.q, "specific-extraction neighborhood size")
        ->capture_default_str();
    tori_cmd->add_option("--d", tori.d, "embedding dimension")->capture_default_str();
    tori_cmd->add_option("--out", tori.out, "output directory")->capture_default_str();
    tori_cmd->add_option("--R", tori.R, "major radius")->capture_default_str();
    tori_cmd->add_option("--r1", tori.r1, "sensor-1 minor radius")->capture_default_str();
    tori_cmd->add_option("--r2", tori.r2, "sensor-2 minor radius")->capture_default_str();
    tori_cmd->add_option("--k", tori.k, "bandwidth neighbor count")->capture_default_str();
    tori_cmd->add_option("--m", tori.m, "diffusion-map power")->capture_default_str();
    tori_cmd->add_option("--m-ad", tori.m_ad, "alternating kernel power")->capture_default_str();
    tori_cmd->add_option("--tau", tori.tau, "pseudo-inverse truncation ratio")
        ->capture_default_str();
    tori_cmd->add_option("--deltas", tori.deltas, "Mahalanobis offsets: raw or centered")
        ->check(CLI::IsMember({"raw", "centered"}))
        ->capture_default_str();
    std::string tori_cfg;
    tori_cmd->add_option("--config", tori_cfg, "key=value file mirroring these flags");

    FuseOpts fuse;
    CLI::App* fuse_cmd = app.add_subcommand("fuse", "two-channel signal fusion");
    fuse_cmd->add_option("--input", fuse.input, "two-channel CSV")->required();
    fuse_cmd->add_option("--seg-len", fuse.seg_len, "segment length")->capture_default_str();
    fuse_cmd->add_option("--overlap", fuse.overlap, "segment overlap")->capture_default_str();
    fuse_cmd->add_option("--hop", fuse.hop, "segment hop (overrides --overlap)");
    fuse_cmd->add_option("--q", fuse.q, "specific-extraction neighborhood size")
        ->capture_default_str();
    fuse_cmd->add_option("--d", fuse.d, "embedding dimension")->capture_default_str();
    fuse_cmd->add_option("--m-ad", fuse.m_ad, "alternating kernel power")->capture_default_str();
    fuse_cmd->add_option("--m", fuse.m, "diffusion-map power")->capture_default_str();
    fuse_cmd->add_option("--k", fuse.k, "bandwidth neighbor count")->capture_default_str();
    fuse_cmd->add_option("--tau", fuse.tau, "pseudo-inverse truncation ratio")
        ->capture_default_str();
    fuse_cmd->add_option("--rate", fuse.rate, "sample rate override (Hz)");
    fuse_cmd->add_option("--out", fuse.out, "output directory")->capture_default_str();
    fuse_cmd->add_option("--deltas", fuse.deltas, "Mahalanobis offsets: raw or centered")
        ->check(CLI::IsMember({"raw", "centered"}))
        ->capture_default_str();
    std::string fuse_cfg;
    fuse_cmd->add_option("--config", fuse_cfg, "key=value file mirroring these flags");

    ValidateOpts val;
    CLI::App* val_cmd = app.add_subcommand("validate", "theorem oracle suites");
    val_cmd->add_option("--suite", val.suite, "thm1, thm2, or all")
        ->check(CLI::IsMember({"thm1", "thm2", "all"}))
        ->capture_default_str();
    val_cmd->add_option("--trials", val.trials, "trial count")->capture_default_str();
    val_cmd->add_option("--seed", val.seed, "rng seed")->capture_default_str();
    std::string val_cfg;
    val_cmd->add_option("--config", val_cfg, "key=value file mirroring these flags");

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expand_config(std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    Eigen::setNbThreads(threads);

    if (tori_cmd->parsed()) return run_guarded([&] { return run_tori(tori); });
    if (fuse_cmd->parsed()) return run_guarded([&] { return run_fuse(fuse); });
    return run_guarded([&] { return run_validate(val); });
}
