// thermogest: command-line front end for the thermal gesture recognition
// library. Subcommands: convert, train-detector, eval, run, rpca-demo,
// cost-report. Exit codes: 0 success, 1 data error, 2 usage error.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "tgr/mmv.hpp"
#include "tgr/mmv_train.hpp"
#include "tgr/pipeline.hpp"
#include "tgr/rpca.hpp"
#include "tgr/thermal_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> dataset_paths(const std::string& data) {
    std::vector<std::string> paths;
    if (fs::is_directory(data)) {
        for (const auto& e : fs::directory_iterator(data))
            if (e.is_regular_file()) paths.push_back(e.path().string());
        std::sort(paths.begin(), paths.end());
    } else if (fs::exists(data)) {
        paths.push_back(data);
    }
    if (paths.empty()) throw DataError("no acquisition files under " + data);
    return paths;
}

std::vector<tgr::io::Acquisition> load_dataset(const std::string& data) {
    std::vector<tgr::io::Acquisition> out;
    for (const auto& p : dataset_paths(data))
        out.push_back(tgr::io::load_acquisition(p));
    return out;
}

void add_pipeline_flags(CLI::App* cmd, tgr::pipeline::PipelineConfig& cfg) {
    cmd->add_option("--n-c", cfg.n_c, "Window length N_c in frames")
        ->capture_default_str();
    cmd->add_option("--track-len", cfg.track_len, "Track length L")
        ->capture_default_str();
    cmd->add_option("--beta", cfg.beta, "Track low-pass decay")
        ->capture_default_str();
    cmd->add_option("--theta-s", cfg.theta_s, "Spike threshold")
        ->capture_default_str();
    cmd->add_option("--theta-c1", cfg.theta_c1, "Circularity extent-difference threshold")
        ->capture_default_str();
    cmd->add_option("--theta-c2", cfg.theta_c2, "Circularity minimum-extent threshold")
        ->capture_default_str();
    cmd->add_option("--lambda", cfg.lambda, "R-PCA sparsity weight")
        ->capture_default_str();
    cmd->add_option("--theta-blob", cfg.theta_blob, "Blob magnitude threshold")
        ->capture_default_str();
    cmd->add_option("--n-gap", cfg.n_gap, "Consecutive misses before closing/re-arming")
        ->capture_default_str();
    cmd->add_option("--rpca-tol", cfg.rpca_tol, "R-PCA convergence tolerance")
        ->capture_default_str();
    cmd->add_option("--rpca-max-iter", cfg.rpca_max_iter, "R-PCA iteration cap")
        ->capture_default_str();
}

json pipeline_json(const tgr::pipeline::PipelineConfig& c) {
    return json{{"n_c", c.n_c},          {"track_len", c.track_len},
                {"beta", c.beta},        {"theta_s", c.theta_s},
                {"theta_c1", c.theta_c1},{"theta_c2", c.theta_c2},
                {"lambda", c.lambda},    {"theta_blob", c.theta_blob},
                {"n_gap", c.n_gap},      {"rpca_tol", c.rpca_tol},
                {"rpca_max_iter", c.rpca_max_iter}};
}

void log_config(const std::string& cmd, const json& cfg) {
    std::cerr << "config " << cmd << ' ' << cfg.dump() << '\n';
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out.precision(17);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            out << (c ? "," : "") << m(r, c);
        out << '\n';
    }
}

// --- convert ----------------------------------------------------------------
// Raw input: plain text, frame pixel values separated by commas and/or
// whitespace, row-major, any line structure; the total count must be a
// multiple of 768. Output: one canonical acquisition file per input.
int cmd_convert(const std::string& input, const std::string& out_dir,
                std::string name) {
    fs::create_directories(out_dir);
    int converted = 0;
    for (const auto& p : dataset_paths(input)) {
        std::ifstream in(p);
        if (!in) throw DataError("cannot open " + p);
        std::vector<double> values;
        std::string tok;
        while (in >> tok) {
            std::replace(tok.begin(), tok.end(), ',', ' ');
            std::istringstream ts(tok);
            double v;
            while (ts >> v) values.push_back(v);
            if (!ts.eof()) throw DataError(p + ": non-numeric value '" + tok + "'");
        }
        if (values.empty() || values.size() % size_t(tgr::io::kFramePixels) != 0)
            throw DataError(p + ": pixel count " + std::to_string(values.size()) +
                            " is not a multiple of 768");
        tgr::io::Acquisition acq;
        acq.name = name.empty() ? fs::path(p).stem().string() : name;
        acq.label = tgr::io::label_from_name(acq.name);
        acq.daypart = tgr::io::daypart_from_name(acq.name);
        const long frames = long(values.size()) / tgr::io::kFramePixels;
        for (long f = 0; f < frames; ++f) {
            tgr::io::ThermalFrame frame;
            frame.timestamp_index = f;
            frame.pixels.resize(tgr::io::kFrameRows, tgr::io::kFrameCols);
            for (int i = 0; i < tgr::io::kFramePixels; ++i)
                frame.pixels(i / tgr::io::kFrameCols, i % tgr::io::kFrameCols) =
                    values[size_t(f * tgr::io::kFramePixels + i)];
            acq.frames.push_back(std::move(frame));
        }
        const std::string out_path =
            (fs::path(out_dir) / (acq.name + ".csv")).string();
        tgr::io::save_acquisition(acq, out_path);
        std::cout << p << " -> " << out_path << " (" << frames << " frames)\n";
        ++converted;
    }
    std::cout << "converted " << converted << " file(s)\n";
    return 0;
}

// --- train-detector -----------------------------------------------------------

std::vector<tgr::mmvtrain::Sample> windows_from_dataset(
    const std::vector<tgr::io::Acquisition>& dataset, int n_c, double theta_s,
    int stride) {
    std::vector<tgr::mmvtrain::Sample> samples;
    for (const auto& acq : dataset) {
        const int label = acq.label == tgr::io::AcqLabel::NoGesture ? 0 : 1;
        for (long k = n_c - 1; k < long(acq.frames.size()); k += stride) {
            const auto w = tgr::io::window_at(acq, k, n_c);
            samples.push_back({tgr::io::encode_window(w, theta_s), label});
        }
    }
    if (samples.empty()) throw DataError("no training windows produced");
    return samples;
}

int cmd_train(const std::string& data, const std::string& checkpoint,
              const std::string& history, const tgr::mmvtrain::TrainConfig& tc,
              int n_c, double theta_s, int stride) {
    const auto dataset = load_dataset(data);
    auto samples = windows_from_dataset(dataset, n_c, theta_s, stride);
    auto [train_set, val_set] =
        tgr::mmvtrain::split_dataset(std::move(samples), tc.split_fraction,
                                     tc.seed);
    std::cout << "training on " << train_set.size() << " windows, validating on "
              << val_set.size() << '\n';
    const tgr::mmvtrain::TrainResult res =
        tgr::mmvtrain::train_detector(train_set, val_set, tc);
    tgr::mmv::save_checkpoint(res.net, checkpoint);
    if (!history.empty()) {
        std::ofstream out(history);
        if (!out) throw DataError("cannot write " + history);
        tgr::mmvtrain::write_history_csv(res.history, out);
    }
    std::cout << "best validation accuracy " << res.best_val_acc << '\n'
              << "checkpoint written to " << checkpoint << '\n';
    return 0;
}

// --- eval / run ---------------------------------------------------------------

const char* class_name(tgr::classifier::GestureClass g) {
    return tgr::classifier::to_string(g);
}

void print_report(const tgr::pipeline::EvaluationReport& rep,
                  std::ostream& out) {
    out << "accuracy " << rep.accuracy << "\n\nconfusion (rows = label, cols = "
        << "predicted; order cirCW, cirCCW, vertical, horizontal, no-gesture)\n";
    const tgr::classifier::GestureClass order[] = {
        tgr::classifier::GestureClass::CirCW,
        tgr::classifier::GestureClass::CirCCW,
        tgr::classifier::GestureClass::Vertical,
        tgr::classifier::GestureClass::Horizontal,
        tgr::classifier::GestureClass::NoGesture};
    for (auto row : order) {
        out << class_name(row) << ':';
        for (auto col : order)
            out << ' ' << rep.confusion(int(row), int(col));
        out << '\n';
    }
    out << "\nmemory: " << rep.params.packed_bytes << " bytes packed, "
        << rep.params.unpacked_bytes << " bytes unpacked\n"
        << "mmv ops/s " << rep.mmv_flops << ", r-pca ops/s " << rep.rpca_flops
        << '\n';
}

int cmd_eval(const std::string& data, const std::string& checkpoint,
             const tgr::pipeline::PipelineConfig& cfg, double gesture_rate,
             const std::string& jsonl_path, const std::string& csv_path) {
    const auto dataset = load_dataset(data);
    const auto net = tgr::mmv::load_checkpoint(checkpoint, cfg.t_steps());
    const auto rep = tgr::pipeline::evaluate(dataset, cfg, net, gesture_rate);
    print_report(rep, std::cout);

    if (!jsonl_path.empty()) {
        std::ofstream out(jsonl_path);
        if (!out) throw DataError("cannot write " + jsonl_path);
        for (const auto& a : rep.per_acquisition) {
            json j{{"name", a.name},
                   {"label", class_name(a.label)},
                   {"correct", a.correct},
                   {"total", a.total}};
            j["events"] = json::array();
            for (const auto& ev : a.events)
                j["events"].push_back({{"class", class_name(ev.predicted)},
                                       {"start", ev.start_index},
                                       {"end", ev.end_index}});
            out << j.dump() << '\n';
        }
    }
    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        if (!out) throw DataError("cannot write " + csv_path);
        out << "name,label,correct,total,events\n";
        for (const auto& a : rep.per_acquisition)
            out << a.name << ',' << class_name(a.label) << ',' << a.correct
                << ',' << a.total << ',' << a.events.size() << '\n';
    }
    return 0;
}

int cmd_run(const std::string& input, const std::string& checkpoint,
            const tgr::pipeline::PipelineConfig& cfg) {
    const auto acq = tgr::io::load_acquisition(input);
    const auto net = tgr::mmv::load_checkpoint(checkpoint, cfg.t_steps());
    tgr::pipeline::StreamStats st;
    const auto events = tgr::pipeline::process_stream(acq.frames, cfg, net, &st);
    for (const auto& ev : events)
        std::cout << "event " << class_name(ev.predicted) << " frames ["
                  << ev.start_index << ", " << ev.end_index << "] track "
                  << ev.track.size() << " points\n";
    std::cout << "windows " << st.windows << ", detections " << st.detections
              << ", r-pca calls " << st.rpca_calls << ", events "
              << events.size() << '\n';
    return 0;
}

int cmd_rpca_demo(const std::string& input, long index, int n_c, double lambda,
                  const std::string& out_l, const std::string& out_s) {
    const auto acq = tgr::io::load_acquisition(input);
    const long k = index < 0 ? long(acq.frames.size()) - 1 : index;
    const auto w = tgr::io::normalize(tgr::io::window_at(acq, k, n_c));
    tgr::rpca::RpcaConfig rc;
    rc.lambda = lambda;
    const auto res = tgr::rpca::pcp(w.rows, rc);
    write_matrix_csv(res.low_rank, out_l);
    write_matrix_csv(res.sparse, out_s);
    std::cout << "window ending at frame " << k << ": " << res.iterations
              << " iterations, " << (res.converged ? "converged" : "iteration cap")
              << ", residual " << res.residual << '\n'
              << "L -> " << out_l << ", S -> " << out_s << '\n';
    return 0;
}

int cmd_cost_report(const std::string& checkpoint,
                    const tgr::pipeline::PipelineConfig& cfg,
                    double gesture_rate) {
    const auto net = tgr::mmv::load_checkpoint(checkpoint, cfg.t_steps());
    const auto pc = tgr::pipeline::count_params(net);
    const auto mmv_frame = tgr::pipeline::mmv_ops_per_frame(net, cfg.t_steps());
    const auto per_gesture = tgr::pipeline::rpca_ops_per_gesture(cfg);
    const auto svd = tgr::pipeline::flops_svd(std::uint64_t(cfg.n_c),
                                              tgr::io::kFrameRows,
                                              tgr::io::kFrameCols);
    std::cout << "network: " << net.neurons() << " neurons, " << net.inputs()
              << " inputs, " << net.classes() << " classes\n"
              << "memory packed   " << pc.packed_bytes << " B\n"
              << "memory unpacked " << pc.unpacked_bytes << " B\n"
              << "mmv ops/frame   " << mmv_frame << '\n'
              << "svd ops         " << svd << '\n'
              << "r-pca ops/gesture " << per_gesture << '\n'
              << "avg ops/s       "
              << tgr::pipeline::avg_flops(double(per_gesture), gesture_rate,
                                          double(mmv_frame), tgr::io::kFrameRate)
              << "  (gesture rate " << gesture_rate << " /s, frame rate "
              << tgr::io::kFrameRate << " /s)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage thermal gesture recognition pipeline"};
    app.require_subcommand(1);

    // convert
    std::string cv_input, cv_out = ".", cv_name;
    auto* convert = app.add_subcommand(
        "convert", "Convert raw numeric frame dumps to canonical acquisitions");
    convert->add_option("--input", cv_input, "Raw file or directory")->required();
    convert->add_option("--output-dir", cv_out, "Destination directory")
        ->capture_default_str();
    convert->add_option("--name", cv_name,
                        "Acquisition name (default: input file stem)");

    // train-detector
    std::string tr_data, tr_ckpt = "detector.mmv", tr_hist;
    tgr::mmvtrain::TrainConfig tc;
    tgr::pipeline::PipelineConfig tr_cfg;
    int tr_stride = 1;
    auto* train = app.add_subcommand("train-detector",
                                     "Train the spiking wake-up detector");
    train->add_option("--data", tr_data, "Canonical acquisition file or directory")
        ->required();
    train->add_option("--checkpoint", tr_ckpt, "Checkpoint output path")
        ->capture_default_str();
    train->add_option("--history", tr_hist, "Per-epoch history CSV output");
    train->add_option("--neurons", tc.neurons, "MMV neuron count")
        ->capture_default_str();
    train->add_option("--lr", tc.learning_rate, "Adam learning rate")
        ->capture_default_str();
    train->add_option("--batch", tc.batch_size, "Batch size")
        ->capture_default_str();
    train->add_option("--epochs", tc.epochs, "Training epochs")
        ->capture_default_str();
    train->add_option("--bin-start", tc.binarize_start_epoch,
                      "Epoch where weight binarization starts")
        ->capture_default_str();
    train->add_option("--bin-end", tc.binarize_end_epoch,
                      "Epoch where weights are fully ternary")
        ->capture_default_str();
    train->add_option("--split", tc.split_fraction, "Train fraction")
        ->capture_default_str();
    train->add_option("--seed", tc.seed, "RNG seed")->capture_default_str();
    train->add_option("--tau-b", tc.tau_b, "Ternarization threshold")
        ->capture_default_str();
    train->add_option("--gate-scale", tc.gate_scale, "Input gate steepness")
        ->capture_default_str();
    train->add_option("--n-c", tr_cfg.n_c, "Window length N_c in frames")
        ->capture_default_str();
    train->add_option("--theta-s", tr_cfg.theta_s, "Spike threshold")
        ->capture_default_str();
    train->add_option("--stride", tr_stride, "Window stride in frames")
        ->capture_default_str();

    // eval
    std::string ev_data, ev_ckpt, ev_jsonl, ev_csv;
    tgr::pipeline::PipelineConfig ev_cfg;
    double ev_rate = 1.0 / 60.0;
    auto* eval = app.add_subcommand("eval", "Evaluate a detector over a dataset");
    eval->add_option("--data", ev_data, "Canonical acquisition file or directory")
        ->required();
    eval->add_option("--checkpoint", ev_ckpt, "Detector checkpoint")->required();
    eval->add_option("--jsonl", ev_jsonl, "Per-acquisition JSON-lines output");
    eval->add_option("--csv", ev_csv, "Per-acquisition CSV output");
    eval->add_option("--gesture-rate", ev_rate, "Assumed gestures per second")
        ->capture_default_str();
    add_pipeline_flags(eval, ev_cfg);

    // run
    std::string rn_input, rn_ckpt;
    tgr::pipeline::PipelineConfig rn_cfg;
    auto* run = app.add_subcommand("run", "Process one acquisition into events");
    run->add_option("--input", rn_input, "Canonical acquisition file")->required();
    run->add_option("--checkpoint", rn_ckpt, "Detector checkpoint")->required();
    add_pipeline_flags(run, rn_cfg);

    // rpca-demo
    std::string rp_input, rp_l = "L.csv", rp_s = "S.csv";
    long rp_index = -1;
    int rp_nc = 5;
    double rp_lambda = 0.05;
    auto* demo = app.add_subcommand("rpca-demo",
                                    "Decompose one window and write L/S as CSV");
    demo->add_option("--input", rp_input, "Canonical acquisition file")->required();
    demo->add_option("--index", rp_index, "Window end frame (default: last)")
        ->capture_default_str();
    demo->add_option("--n-c", rp_nc, "Window length N_c in frames")
        ->capture_default_str();
    demo->add_option("--lambda", rp_lambda, "R-PCA sparsity weight")
        ->capture_default_str();
    demo->add_option("--out-l", rp_l, "Low-rank CSV path")->capture_default_str();
    demo->add_option("--out-s", rp_s, "Sparse CSV path")->capture_default_str();

    // cost-report
    std::string cr_ckpt;
    tgr::pipeline::PipelineConfig cr_cfg;
    double cr_rate = 1.0 / 60.0;
    auto* cost = app.add_subcommand("cost-report",
                                    "Print the memory and compute cost tables");
    cost->add_option("--checkpoint", cr_ckpt, "Detector checkpoint")->required();
    cost->add_option("--gesture-rate", cr_rate, "Assumed gestures per second")
        ->capture_default_str();
    add_pipeline_flags(cost, cr_cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*convert) {
            log_config("convert", json{{"input", cv_input},
                                       {"output_dir", cv_out},
                                       {"name", cv_name}});
            return cmd_convert(cv_input, cv_out, cv_name);
        }
        if (*train) {
            json jc{{"data", tr_data},       {"checkpoint", tr_ckpt},
                    {"history", tr_hist},    {"neurons", tc.neurons},
                    {"lr", tc.learning_rate},{"batch", tc.batch_size},
                    {"epochs", tc.epochs},   {"bin_start", tc.binarize_start_epoch},
                    {"bin_end", tc.binarize_end_epoch},
                    {"split", tc.split_fraction},
                    {"seed", tc.seed},       {"tau_b", tc.tau_b},
                    {"gate_scale", tc.gate_scale},
                    {"n_c", tr_cfg.n_c},     {"theta_s", tr_cfg.theta_s},
                    {"stride", tr_stride}};
            log_config("train-detector", jc);
            return cmd_train(tr_data, tr_ckpt, tr_hist, tc, tr_cfg.n_c,
                             tr_cfg.theta_s, tr_stride);
        }
        if (*eval) {
            json jc = pipeline_json(ev_cfg);
            jc["data"] = ev_data;
            jc["checkpoint"] = ev_ckpt;
            jc["gesture_rate"] = ev_rate;
            log_config("eval", jc);
            return cmd_eval(ev_data, ev_ckpt, ev_cfg, ev_rate, ev_jsonl, ev_csv);
        }
        if (*run) {
            json jc = pipeline_json(rn_cfg);
            jc["input"] = rn_input;
            jc["checkpoint"] = rn_ckpt;
            log_config("run", jc);
            return cmd_run(rn_input, rn_ckpt, rn_cfg);
        }
        if (*demo) {
            log_config("rpca-demo", json{{"input", rp_input},
                                         {"index", rp_index},
                                         {"n_c", rp_nc},
                                         {"lambda", rp_lambda},
                                         {"out_l", rp_l},
                                         {"out_s", rp_s}});
            return cmd_rpca_demo(rp_input, rp_index, rp_nc, rp_lambda, rp_l, rp_s);
        }
        if (*cost) {
            json jc = pipeline_json(cr_cfg);
            jc["checkpoint"] = cr_ckpt;
            jc["gesture_rate"] = cr_rate;
            log_config("cost-report", jc);
            return cmd_cost_report(cr_ckpt, cr_cfg, cr_rate);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
