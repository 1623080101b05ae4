// teleopd: command-line front end for the simulated visuotactile loop.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tactile/dataset.hpp"
#include "tactile/error.hpp"
#include "tactile/flowtrack.hpp"
#include "tactile/forceest.hpp"
#include "tactile/gelsim.hpp"
#include "tactile/ridge.hpp"
#include "tactile/sliprig.hpp"
#include "tactile/teleop/config.hpp"
#include "tactile/teleop/experiment.hpp"
#include "tactile/teleop/server.hpp"
#include "tactile/teleop/session.hpp"

namespace fs = std::filesystem;
using namespace tactile;
using namespace tactile::teleop;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

/// Sorted *.pgm files of a directory.
std::vector<fs::path> list_frames(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(Errc::io_error, "not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".pgm") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw Error(Errc::io_error, "no .pgm frames in " + dir.string());
    return out;
}

std::vector<GelImage> load_frames(const fs::path& dir) {
    std::vector<GelImage> frames;
    for (const auto& p : list_frames(dir)) frames.push_back(read_pgm(p));
    return frames;
}

std::string frame_name(std::size_t i) {
    std::ostringstream s;
    s << "frame_" << std::setw(5) << std::setfill('0') << i << ".pgm";
    return s.str();
}

/// Opens path for writing, or returns stdout when path is empty or "-".
class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_.open(path);
            if (!file_) throw Error(Errc::io_error, "cannot write " + path);
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

struct Common {
    std::string config_path;
    PipelineConfig load() const { return config_path.empty() ? PipelineConfig{} : load_config(config_path); }
};

// ---------------------------------------------------------------------------

struct GenArgs {
    std::string out = "gen_out";
    int frames = 20;
    double fx = 0.0, fy = 1.0, fn = 2.0, tau = 0.0;
    std::optional<double> noise;
    std::optional<double> slip_tension;
    std::optional<int> dataset;
};

int run_gen(const Common& common, const GenArgs& a) {
    PipelineConfig cfg = common.load();
    if (a.noise) cfg.gel.noise_sigma = *a.noise;
    Rng rng(cfg.seed);

    if (a.dataset) {
        // Labeled feature dataset for calibrate.
        const auto rows = make_dataset(cfg.gel, cfg.track, cfg.calibration, static_cast<std::size_t>(*a.dataset), rng);
        Output out(a.out);
        write_dataset_csv(out.stream(), rows);
        std::cerr << "wrote " << rows.size() << " samples\n";
        return 0;
    }

    fs::create_directories(a.out);
    if (a.slip_tension) {
        const LabeledSequence seq = generate_labeled_sequence(cfg.rig, cfg.gel, *a.slip_tension);
        for (std::size_t i = 0; i < seq.frames.size(); ++i) write_pgm(fs::path(a.out) / frame_name(i), seq.frames[i]);
        std::ofstream labels(fs::path(a.out) / "labels.csv");
        write_labels_csv(labels, seq);
        std::ofstream tel(fs::path(a.out) / "telemetry.csv");
        write_telemetry_csv(tel, seq.telemetry);
        std::cerr << "wrote " << seq.frames.size() << " frames to " << a.out << '\n';
        return 0;
    }

    if (a.frames < 1) throw CLI::ValidationError("--frames", "must be >= 1");
    // Linear ramp from rest to the target wrench; frame 0 is the rest frame.
    GelState gel = make_gel(cfg.gel);
    const Wrench target{a.fx, a.fy, a.fn, a.tau};
    std::ofstream labels(fs::path(a.out) / "labels.csv");
    labels << "frame,fx,fy,fn,tau\n";
    for (int i = 0; i < a.frames; ++i) {
        const double t = a.frames == 1 ? 1.0 : static_cast<double>(i) / (a.frames - 1);
        const Wrench w = t * target;
        gel = apply_wrench(std::move(gel), w);
        write_pgm(fs::path(a.out) / frame_name(static_cast<std::size_t>(i)), render(gel));
        labels << i << ',' << w.fx << ',' << w.fy << ',' << w.fn << ',' << w.tau << '\n';
    }
    std::cerr << "wrote " << a.frames << " frames to " << a.out << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct TrackArgs {
    std::string frames;
    std::string out;
};

int run_track(const Common& common, const TrackArgs& a) {
    const PipelineConfig cfg = common.load();
    const auto frames = load_frames(a.frames);
    const auto flows = track_sequence(frames, cfg.track, cfg.gel.marker_count());
    Output out(a.out);
    auto& os = out.stream();
    os << "frame,base_x,base_y,dx,dy,valid,residual\n";
    for (std::size_t f = 0; f < flows.size(); ++f)
        for (const auto& e : flows[f].entries)
            os << f + 1 << ',' << e.base.x << ',' << e.base.y << ',' << e.delta.x << ',' << e.delta.y << ','
               << (e.valid ? 1 : 0) << ',' << e.residual << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
    std::string frames;
    std::string model;
    std::string out;
    bool slip = false;
};

int run_estimate(const Common& common, const EstimateArgs& a) {
    const PipelineConfig cfg = common.load();
    const auto frames = load_frames(a.frames);
    const auto flows = track_sequence(frames, cfg.track, cfg.gel.marker_count());
    std::optional<RidgeModel> model;
    if (!a.model.empty()) model = load_ridge(a.model);

    std::vector<ForceEstimate> estimates;
    Output out(a.out);
    auto& os = out.stream();
    os << "frame,fx,fy,fn,tau,total,quality\n";
    for (std::size_t f = 0; f < flows.size(); ++f) {
        ForceEstimate e;
        try {
            if (model) {
                const FeatureVector feat = pool_features(flows[f], cfg.calibration);
                e = predict_ridge(*model, feat, static_cast<double>(flows[f].valid_count()) / flows[f].entries.size());
            } else {
                e = estimate_from_flow(flows[f], cfg.calibration);
            }
        } catch (const Error& err) {
            if (err.code() != Errc::insufficient_valid_flow) throw;
            std::cerr << "frame " << f + 1 << ": " << err.what() << '\n';
        }
        estimates.push_back(e);
        os << f + 1 << ',' << e.wrench.fx << ',' << e.wrench.fy << ',' << e.wrench.fn << ',' << e.wrench.tau << ','
           << e.total << ',' << e.quality << '\n';
    }
    if (a.slip) {
        for (const auto& ev : detect_slip(estimates, flows, cfg.slip))
            std::cerr << "slip at frame " << ev.frame + 1 << " (" << to_string(ev.reason) << ")\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct CalibrateArgs {
    std::string data;
    std::string method = "ridge";
    double lambda = 0.0;
    std::string out;
};

int run_calibrate(const Common& common, const CalibrateArgs& a) {
    const PipelineConfig cfg = common.load();
    std::ifstream in(a.data);
    if (!in) throw Error(Errc::io_error, "cannot open " + a.data);
    const auto rows = read_dataset_csv(in);
    if (a.method == "gains") {
        const GainFit g = fit_gains(rows, lever_ratio(cfg.gel));
        Output out(a.out);
        out.stream() << "k_s,k_n,k_t\n" << g.k_s << ',' << g.k_n << ',' << g.k_t << '\n';
        return 0;
    }
    const RidgeModel m = train_ridge(rows, a.lambda);
    if (a.out.empty() || a.out == "-") {
        std::cout << to_json(m).dump(2) << '\n';
    } else {
        save_ridge(a.out, m);
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct SlipBenchArgs {
    std::vector<double> mu_s{0.3, 0.5, 0.8, 1.2};
    std::vector<double> normal{1.0, 2.0, 5.0, 10.0};
    std::optional<double> mu_k;
    std::string out;
};

int run_slip_bench(const Common& common, const SlipBenchArgs& a) {
    const PipelineConfig cfg = common.load();
    // Without an explicit mu_k, keep the configured mu_k / mu_s ratio.
    const double ratio = cfg.rig.mu_kinetic / cfg.rig.mu_static;
    Output out(a.out);
    auto& os = out.stream();
    os << "mu_s,mu_k,normal,slip_force,oracle,abs_error,tolerance,trials\n";
    for (double mu_s : a.mu_s)
        for (double n : a.normal) {
            RigConfig rig = cfg.rig;
            rig.mu_static = mu_s;
            rig.mu_kinetic = a.mu_k ? *a.mu_k : ratio * mu_s;
            rig.clamp_normal = n;
            const SlipSearch s = find_slip_force(rig);
            const double oracle = mu_s * n;
            const double tol = std::max(0.02 * oracle, rig.tension_quantum());
            os << mu_s << ',' << rig.mu_kinetic << ',' << n << ',' << s.slip_force << ',' << oracle << ','
               << std::abs(s.slip_force - oracle) << ',' << tol << ',' << s.trials << '\n';
        }
    return 0;
}

// ---------------------------------------------------------------------------

struct ServeArgs {
    std::string host = "127.0.0.1";
    std::optional<int> tcp_port;
    std::optional<int> ws_port;
    std::string session;
    std::string static_dir;
    double duration = 0.0;
};

int run_serve(const Common& common, const ServeArgs& a) {
    const PipelineConfig cfg = common.load();
    ServerOptions opts;
    opts.host = a.host;
    opts.tcp_port = a.tcp_port.value_or(cfg.wire.tcp_port);
    opts.ws_port = a.ws_port.value_or(cfg.wire.ws_port);
    opts.session_path = a.session;
    opts.static_dir = a.static_dir;

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    Server server(cfg, opts);
    server.start();
    std::cerr << "serving tcp:" << server.tcp_port() << " ws:" << server.ws_port() << '\n';
    const auto start = std::chrono::steady_clock::now();
    while (!g_interrupted) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        if (a.duration > 0.0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >= a.duration)
            break;
    }
    server.stop();
    const ServerStats s = server.stats();
    std::cout << "ticks " << s.ticks << " clients " << s.clients << " grip " << s.grip_received << '/'
              << s.grip_consumed << " mean_latency_ms " << s.mean_latency_ms << " max_sensor_lag " << s.max_sensor_lag
              << '\n';
    return 0;
}

// ---------------------------------------------------------------------------

struct ExperimentArgs {
    std::string mode = "feedback";
    bool both = false;
    int draws = 0;
    std::string out_dir;
};

void print_summary(const std::string& mode, const SessionSummary& s) {
    std::cout << mode << ": deformation_ratio " << s.final_deformation_ratio << " peak_force " << s.peak_force
              << " dropped " << (s.dropped ? "yes" : "no") << " mean_latency_ms " << s.mean_latency_ms << '\n';
}

int run_experiment(const Common& common, const ExperimentArgs& a) {
    const PipelineConfig cfg = common.load();
    if (a.draws > 0) {
        const auto outcomes = run_robustness(cfg, a.draws);
        int wins = 0;
        std::cout << "draw,d0,stiffness,yield_force,plastic_rate,hold_min,naive,feedback\n";
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            const auto& o = outcomes[i];
            wins += o.feedback_gentler() ? 1 : 0;
            std::cout << i << ',' << o.ball.rest_diameter << ',' << o.ball.stiffness << ',' << o.ball.yield_force << ','
                      << o.ball.plastic_rate << ',' << o.ball.hold_min << ',' << o.naive.final_deformation_ratio << ','
                      << o.feedback.final_deformation_ratio << '\n';
        }
        std::cout << "feedback gentler in " << wins << "/" << outcomes.size() << " draws\n";
        return 0;
    }

    std::vector<ControllerMode> modes;
    if (a.both) {
        modes = {ControllerMode::naive, ControllerMode::feedback};
    } else if (a.mode == "naive") {
        modes = {ControllerMode::naive};
    } else {
        modes = {ControllerMode::feedback};
    }
    std::vector<SessionRecord> records;
    for (auto m : modes) {
        records.push_back(run_controller_experiment(cfg, m));
        print_summary(records.back().mode, records.back().summary);
        if (!a.out_dir.empty()) {
            fs::create_directories(a.out_dir);
            write_session(fs::path(a.out_dir) / (records.back().mode + ".jsonl"), records.back());
        }
    }
    if (records.size() == 2 && records[0].summary.final_deformation_ratio > 0.0) {
        const double reduction =
            1.0 - records[1].summary.final_deformation_ratio / records[0].summary.final_deformation_ratio;
        std::cout << "reduction " << reduction * 100.0 << "%\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct ReplayArgs {
    std::string session;
    std::string out;
};

int run_replay(const Common&, const ReplayArgs& a) {
    const SessionRecord original = read_session(a.session);
    const SessionRecord again = replay_session(original);
    print_summary("original", original.summary);
    print_summary("replay", again.summary);
    if (!a.out.empty()) write_session(a.out, again);
    const bool same = again.summary.same_outcome(original.summary);
    std::cout << (same ? "outcome reproduced" : "outcome differs") << '\n';
    return same ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulated visuotactile teleoperation"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--config", common.config_path, "JSON pipeline config")->check(CLI::ExistingFile);

    GenArgs gen;
    auto* c_gen = app.add_subcommand("gen", "Render synthetic gel image sequences");
    c_gen->add_option("--out", gen.out, "Output directory (or CSV file with --dataset)");
    c_gen->add_option("--frames", gen.frames, "Frames in a wrench ramp");
    c_gen->add_option("--fx", gen.fx, "Final shear x (N)");
    c_gen->add_option("--fy", gen.fy, "Final shear y (N)");
    c_gen->add_option("--fn", gen.fn, "Final normal force (N)");
    c_gen->add_option("--tau", gen.tau, "Final torsion (N mm)");
    c_gen->add_option("--noise", gen.noise, "Marker jitter sigma (px)");
    c_gen->add_option("--slip", gen.slip_tension, "Labeled slip-rig sequence at this commanded tension (N)");
    c_gen->add_option("--dataset", gen.dataset, "Write N random labeled feature rows as CSV");

    TrackArgs track;
    auto* c_track = app.add_subcommand("track", "Track markers through a PGM sequence");
    c_track->add_option("--frames", track.frames, "Directory of PGM frames; the first is the reference")->required();
    c_track->add_option("--out", track.out, "Flow CSV (default stdout)");

    EstimateArgs est;
    auto* c_est = app.add_subcommand("estimate", "Estimate wrenches from a PGM sequence");
    c_est->add_option("--frames", est.frames, "Directory of PGM frames; the first is the reference")->required();
    c_est->add_option("--model", est.model, "Ridge model JSON (default: closed-form inverse)");
    c_est->add_option("--out", est.out, "Estimate CSV (default stdout)");
    c_est->add_flag("--slip", est.slip, "Also run the slip detector");

    CalibrateArgs cal;
    auto* c_cal = app.add_subcommand("calibrate", "Fit gel gains or a ridge model from a labeled CSV");
    c_cal->add_option("--data", cal.data, "Labeled dataset CSV")->required();
    c_cal->add_option("--method", cal.method, "gains or ridge")->check(CLI::IsMember({"gains", "ridge"}));
    c_cal->add_option("--lambda", cal.lambda, "Ridge penalty")->check(CLI::NonNegativeNumber);
    c_cal->add_option("--out", cal.out, "Output file (default stdout)");

    SlipBenchArgs bench;
    auto* c_bench = app.add_subcommand("slip-bench", "Sweep the slip rig over a (mu_s, N) grid");
    c_bench->add_option("--mu-s", bench.mu_s, "Static friction coefficients")->delimiter(',');
    c_bench->add_option("--normal", bench.normal, "Clamp normal forces (N)")->delimiter(',');
    c_bench->add_option("--mu-k", bench.mu_k, "Kinetic friction coefficient");
    c_bench->add_option("--out", bench.out, "CSV output (default stdout)");

    ServeArgs serve;
    auto* c_serve = app.add_subcommand("serve", "Run the pipeline with TCP and web-socket endpoints");
    c_serve->add_option("--host", serve.host, "Bind address");
    c_serve->add_option("--tcp-port", serve.tcp_port, "Raw frame port (0 = any, -1 = off)");
    c_serve->add_option("--ws-port", serve.ws_port, "Web-socket port (0 = any, -1 = off)");
    c_serve->add_option("--session", serve.session, "Session log (.jsonl)");
    c_serve->add_option("--static", serve.static_dir, "Directory served over HTTP on the web-socket port");
    c_serve->add_option("--duration", serve.duration, "Stop after this many seconds (0 = until interrupted)");

    ExperimentArgs exp;
    auto* c_exp = app.add_subcommand("experiment", "Scripted naive vs feedback grasp");
    c_exp->add_option("--mode", exp.mode, "naive or feedback")->check(CLI::IsMember({"naive", "feedback"}));
    c_exp->add_flag("--both", exp.both, "Run both modes and report the reduction");
    c_exp->add_option("--draws", exp.draws, "Randomized ball draws for the robustness check");
    c_exp->add_option("--out", exp.out_dir, "Directory for session logs");

    ReplayArgs replay;
    auto* c_replay = app.add_subcommand("replay", "Re-run a recorded session");
    c_replay->add_option("--session", replay.session, "Session log (.jsonl)")->required()->check(CLI::ExistingFile);
    c_replay->add_option("--out", replay.out, "Write the replayed session here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (c_gen->parsed()) return run_gen(common, gen);
        if (c_track->parsed()) return run_track(common, track);
        if (c_est->parsed()) return run_estimate(common, est);
        if (c_cal->parsed()) return run_calibrate(common, cal);
        if (c_bench->parsed()) return run_slip_bench(common, bench);
        if (c_serve->parsed()) return run_serve(common, serve);
        if (c_exp->parsed()) return run_experiment(common, exp);
        if (c_replay->parsed()) return run_replay(common, replay);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
