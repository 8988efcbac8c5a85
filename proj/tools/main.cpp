#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "eitsim/experiments.hpp"
#include "eitsim/learners.hpp"
#include "eitsim/pca.hpp"
#include "eitsim/phantom.hpp"
#include "eitsim/recon.hpp"

namespace fs = std::filesystem;
using namespace eitsim;

namespace {

struct Options {
    DatasetConfig dataset;
    std::string scenario = "loc";
    std::string split_mode = "specimen-holdout";
    int pca_components = 4;
    double pca_tau = 0.0;  // > 0 switches to variance-threshold selection
    int hidden_loc = 5;
    int hidden_crack = 5;
    int hidden_health = 3;
    int knn_k = 5;
    double svm_c = 1.0;
    std::uint64_t train_seed = 6;
    int heatmap_samples = 2;
    double lambda = 0.05;
    std::string prior = "sensitivity";
    int frame = 0;
    std::string task;  // train/eval: radial | angular | crack | health (default by scenario)
    std::string out = "out";
    std::string data;   // input dir holding frames.csv/baseline.csv (default: out)
    std::string model;  // input model bundle for eval (default: <out>/model.json)
};

void bind_options(CLI::App& app, Options& o) {
    app.add_option("--tank-radius", o.dataset.tank_radius, "tank radius, m")->capture_default_str();
    app.add_option("--refinement", o.dataset.refinement_level, "mesh refinement level")
        ->capture_default_str();
    app.add_option("--coverage", o.dataset.electrode_coverage, "electrode arc coverage in (0,1)")
        ->capture_default_str();
    app.add_option("--current", o.dataset.current_amplitude, "drive current, A")->capture_default_str();
    app.add_option("--contact-impedance", o.dataset.contact_impedance, "contact impedance, Ohm m^2")
        ->capture_default_str();
    MaterialParams& m = o.dataset.materials;
    app.add_option("--sigma-water", m.sigma_water, "tank water conductivity, S/m")->capture_default_str();
    app.add_option("--sigma-specimen", m.sigma_specimen, "specimen conductivity, S/m")
        ->capture_default_str();
    app.add_option("--alpha-healthy", m.alpha_healthy, "healthy load gain")->capture_default_str();
    app.add_option("--alpha-loose", m.alpha_loose, "loose load gain")->capture_default_str();
    app.add_option("--alpha-vcrack", m.alpha_vcrack, "vertical-crack load gain")->capture_default_str();
    app.add_option("--alpha-hcrack", m.alpha_hcrack, "horizontal-crack load gain")->capture_default_str();
    app.add_option("--gap-width", m.gap_width, "loose gap width, m")->capture_default_str();
    app.add_option("--slit-width", m.slit_width, "crack slit width, m")->capture_default_str();
    app.add_option("--specimen-radius", m.specimen_radius, "specimen radius, m")->capture_default_str();
    NoiseModel& n = o.dataset.noise;
    app.add_option("--noise", n.per_reading_sd, "per-reading noise sd, fraction of baseline RMS")
        ->capture_default_str();
    app.add_option("--readings", n.readings_per_measurement, "averaged readings per measurement")
        ->capture_default_str();
    app.add_option("--sigma-jitter", n.specimen_sigma_jitter, "specimen conductivity jitter")
        ->capture_default_str();
    app.add_option("--position-jitter", n.position_jitter, "specimen position jitter, m")
        ->capture_default_str();
    app.add_option("--angle-jitter", n.angle_jitter, "specimen angle jitter, deg")->capture_default_str();
    app.add_option("--noise-seed", n.seed, "noise stream seed")->capture_default_str();
    app.add_option("--specimens", o.dataset.specimens, "specimen count (loc/crack)")->capture_default_str();
    app.add_option("--health-specimens", o.dataset.health_specimens, "specimens per health condition")
        ->capture_default_str();
    app.add_option("--fixed-load", o.dataset.fixed_load, "load for loc/crack frames, N")
        ->capture_default_str();
    app.add_option("--load-min", o.dataset.load_min, "health sweep start, N")->capture_default_str();
    app.add_option("--load-max", o.dataset.load_max, "health sweep end, N")->capture_default_str();
    app.add_option("--load-steps", o.dataset.load_steps, "health sweep steps")->capture_default_str();
    app.add_option("--split-mode", o.split_mode, "specimen-holdout | random")
        ->check(CLI::IsMember({"specimen-holdout", "random"}))
        ->capture_default_str();
    app.add_option("--seed", o.dataset.seed, "root seed for splits")->capture_default_str();
    app.add_option("--jobs", o.dataset.jobs, "worker threads for frame simulation")->capture_default_str();
    app.add_option("--pca-components", o.pca_components, "fixed PCA component count")
        ->capture_default_str();
    app.add_option("--pca-tau", o.pca_tau, "if > 0, pick k by cumulative explained ratio >= tau")
        ->capture_default_str();
    app.add_option("--hidden-loc", o.hidden_loc, "hidden units, location networks")->capture_default_str();
    app.add_option("--hidden-crack", o.hidden_crack, "hidden units, crack network")->capture_default_str();
    app.add_option("--hidden-health", o.hidden_health, "hidden units, health network")
        ->capture_default_str();
    app.add_option("--knn-k", o.knn_k, "k for KNN")->capture_default_str();
    app.add_option("--svm-c", o.svm_c, "SVM regularization C")->capture_default_str();
    app.add_option("--train-seed", o.train_seed, "weight-init / fold seed")->capture_default_str();
    app.add_option("--heatmap-samples", o.heatmap_samples, "test frames rendered per experiment")
        ->capture_default_str();
    app.add_option("--lambda", o.lambda, "reconstruction regularization")->capture_default_str();
    app.add_option("--prior", o.prior, "identity | sensitivity")
        ->check(CLI::IsMember({"identity", "sensitivity"}))
        ->capture_default_str();
    app.add_option("--frame", o.frame, "frame index for reconstruct/plot")->capture_default_str();
    app.add_option("--task", o.task, "train/eval task: radial | angular | crack | health")
        ->capture_default_str();
    app.add_option("--out", o.out, "output directory")->capture_default_str();
    app.add_option("--data", o.data, "input dataset directory (default: --out)")->capture_default_str();
    app.add_option("--model", o.model, "model bundle path for eval (default: <out>/model.json)")
        ->capture_default_str();
}

void write_snapshot(const CLI::App& app, const Options& o, int argc, char** argv) {
    fs::create_directories(o.out);
    std::ofstream f(fs::path(o.out) / "resolved_config.txt");
    f << "# command:";
    for (int i = 0; i < argc; ++i) f << " " << argv[i];
    f << "\n" << app.config_to_str(true, false);
}

ExperimentConfig experiment_config(const Options& o) {
    ExperimentConfig c;
    c.dataset = o.dataset;
    c.dataset.split_mode = split_mode_from_string(o.split_mode);
    c.pca_components = o.pca_components;
    c.mlp_hidden_loc = o.hidden_loc;
    c.mlp_hidden_crack = o.hidden_crack;
    c.mlp_hidden_health = o.hidden_health;
    c.knn_k = o.knn_k;
    c.svm_c = o.svm_c;
    c.train_seed = o.train_seed;
    c.heatmap_samples = o.heatmap_samples;
    return c;
}

LabeledDataset load_dataset(const Options& o) {
    fs::path dir = o.data.empty() ? o.out : o.data;
    fs::path frames = dir / "frames.csv", baseline = dir / "baseline.csv";
    if (!fs::exists(frames) || !fs::exists(baseline))
        throw InvalidParameter("no dataset found in " + dir.string() +
                               " (expected frames.csv and baseline.csv; run `dataset` first)");
    return read_dataset_csv(frames.string(), baseline.string());
}

PcaSelector selector(const Options& o) {
    if (o.pca_tau > 0.0) return VarianceThreshold{o.pca_tau};
    return FixedComponents{o.pca_components};
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, const std::vector<int>& rows) {
    Eigen::MatrixXd out(rows.size(), x.cols());
    for (size_t i = 0; i < rows.size(); ++i) out.row(i) = x.row(rows[i]);
    return out;
}

int cmd_mesh(const Options& o) {
    Mesh mesh = build_mesh(o.dataset.tank_radius, o.dataset.refinement_level,
                           o.dataset.electrode_coverage);
    std::ofstream(fs::path(o.out) / "mesh.json") << mesh_to_json(mesh);
    std::cout << "mesh: " << mesh.num_nodes() << " nodes, " << mesh.num_elements() << " elements -> "
              << (fs::path(o.out) / "mesh.json").string() << "\n";
    return 0;
}

int cmd_dataset(const Options& o) {
    DatasetConfig cfg = o.dataset;
    cfg.split_mode = split_mode_from_string(o.split_mode);
    LabeledDataset ds = generate_dataset(scenario_kind_from_string(o.scenario), cfg);
    fs::path dir(o.out);
    write_dataset_csv(ds, (dir / "frames.csv").string(), (dir / "baseline.csv").string());
    std::cout << "dataset " << o.scenario << ": " << ds.rows() << " frames -> "
              << (dir / "frames.csv").string() << "\n";
    return 0;
}

// One-step difference reconstruction of a stored frame against the homogeneous
// water reference; emits a heatmap SVG and a per-element delta-sigma CSV.
int cmd_reconstruct(const Options& o) {
    LabeledDataset ds = load_dataset(o);
    if (o.frame < 0 || o.frame >= ds.rows())
        throw InvalidParameter("frame index out of range: " + std::to_string(o.frame));
    Mesh mesh = build_mesh(o.dataset.tank_radius, o.dataset.refinement_level,
                           o.dataset.electrode_coverage);
    ConductivityField ref{Eigen::VectorXd::Constant(mesh.num_elements(),
                                                    o.dataset.materials.sigma_water)};
    ReconConfig rc{o.lambda,
                   o.prior == "identity" ? ReconPrior::Identity : ReconPrior::SensitivityWeighted};
    Reconstructor recon(mesh, DriveProtocol::adjacent(o.dataset.current_amplitude), rc, ref,
                        o.dataset.contact_impedance);
    Eigen::VectorXd delta = recon.reconstruct(ds.X.row(o.frame).transpose());
    fs::path dir(o.out);
    std::string stem = "recon_frame" + std::to_string(o.frame);
    std::ofstream(dir / (stem + ".svg")) << render_heatmap(mesh, delta);
    std::ofstream csv(dir / (stem + ".csv"));
    csv << "element,x,y,area,delta_sigma\n";
    for (int k = 0; k < mesh.num_elements(); ++k) {
        const ElementGeometry& g = mesh.geometry[k];
        csv << k << "," << g.centroid.x() << "," << g.centroid.y() << "," << g.area << "," << delta[k]
            << "\n";
    }
    Vec2 c = blob_centroid(mesh, delta);
    std::cout << "frame " << o.frame << " blob centroid (" << c.x() << ", " << c.y() << ") m -> "
              << (dir / (stem + ".svg")).string() << "\n";
    return 0;
}

int cmd_pca(const Options& o) {
    LabeledDataset ds = load_dataset(o);
    PcaModel pca = fit_pca(rows_of(ds.X, ds.split_rows(Split::Train)), selector(o));
    Eigen::MatrixXd scores = project(pca, ds.X);
    fs::path dir(o.out);
    std::ofstream(dir / "pca.json") << pca_to_json(pca);
    std::ofstream csv(dir / "scores.csv");
    csv << "row,split";
    for (int j = 0; j < pca.k(); ++j) csv << ",pc" << j + 1;
    csv << "\n";
    for (int i = 0; i < ds.rows(); ++i) {
        csv << i << "," << to_string(ds.meta[i].split);
        for (int j = 0; j < pca.k(); ++j) csv << "," << scores(i, j);
        csv << "\n";
    }
    std::cout << "pca: k=" << pca.k() << ", cumulative ratio " << pca.explained_ratio.sum() << " -> "
              << (dir / "pca.json").string() << "\n";
    return 0;
}

std::string default_task(const LabeledDataset& ds) {
    switch (ds.meta.at(0).scenario) {
        case ScenarioKind::LOC: return "radial";
        case ScenarioKind::CRACK: return "crack";
        case ScenarioKind::HEALTH: return "health";
    }
    return "radial";
}

struct TaskData {
    std::string task;
    bool angular = false;  // sin/cos regression instead of classification
    std::vector<std::string> classes;
    std::vector<int> labels;        // classification
    std::vector<double> angle_deg;  // regression
    std::vector<int> keep;          // dataset rows entering the task
};

TaskData task_data(const LabeledDataset& ds, std::string task) {
    if (task.empty()) task = default_task(ds);
    TaskData t;
    t.task = task;
    for (int i = 0; i < ds.rows(); ++i) {
        const FrameMeta& m = ds.meta[i];
        if (task == "radial") {
            t.classes = {"r0", "r2", "r4"};
            t.labels.push_back(static_cast<int>(std::lround(m.r_cm / 2.0)));
        } else if (task == "angular") {
            if (m.r_cm < 0.5) continue;  // angle undefined at the center
            t.angular = true;
            t.angle_deg.push_back(m.theta_deg);
        } else if (task == "crack") {
            t.angular = true;
            t.angle_deg.push_back(m.crack_deg);
        } else if (task == "health") {
            if (!m.condition) throw InvalidParameter("dataset rows carry no condition labels");
            t.classes = {"healthy", "vertical-crack", "horizontal-crack", "loose"};
            t.labels.push_back(static_cast<int>(*m.condition));
        } else {
            throw InvalidParameter("unknown task: " + task);
        }
        t.keep.push_back(i);
    }
    return t;
}

int hidden_for(const Options& o, const std::string& task) {
    if (task == "crack") return o.hidden_crack;
    if (task == "health") return o.hidden_health;
    return o.hidden_loc;
}

// Self-contained bundle: PCA + train-split score standardization + network.
int cmd_train(const Options& o) {
    LabeledDataset ds = load_dataset(o);
    TaskData t = task_data(ds, o.task);
    std::vector<int> train, val;
    for (size_t i = 0; i < t.keep.size(); ++i) {
        Split s = ds.meta[t.keep[i]].split;
        if (s == Split::Train) train.push_back(static_cast<int>(i));
        if (s == Split::Validation) val.push_back(static_cast<int>(i));
    }
    Eigen::MatrixXd x_task = rows_of(ds.X, t.keep);
    PcaModel pca = fit_pca(rows_of(x_task, train), selector(o));
    Eigen::MatrixXd scores = project(pca, x_task);
    Eigen::RowVectorXd mu = rows_of(scores, train).colwise().mean();
    Eigen::RowVectorXd sd = ((rows_of(scores, train).rowwise() - mu).cwiseAbs2().colwise().sum() /
                             std::max<double>(train.size() - 1, 1))
                                .cwiseSqrt()
                                .cwiseMax(1e-300);
    Eigen::MatrixXd z = (scores.rowwise() - mu).array().rowwise() / sd.array();
    Eigen::MatrixXd y;
    if (t.angular) {
        y.resize(t.keep.size(), 2);
        for (size_t i = 0; i < t.keep.size(); ++i) y.row(i) = encode_angle(t.angle_deg[i]).transpose();
    } else {
        y = one_hot(t.labels, static_cast<int>(t.classes.size()));
    }
    MlpTrainConfig tc;
    tc.hidden_size = hidden_for(o, t.task);
    tc.task = t.angular ? MlpTask::Regression : MlpTask::Classification;
    tc.seed = o.train_seed;
    auto [model, report] = train_mlp(rows_of(z, train), rows_of(y, train), rows_of(z, val),
                                     rows_of(y, val), tc);
    nlohmann::json bundle;
    bundle["task"] = t.task;
    bundle["classes"] = t.classes;
    bundle["pca"] = nlohmann::json::parse(pca_to_json(pca));
    bundle["score_mean"] = std::vector<double>(mu.begin(), mu.end());
    bundle["score_sd"] = std::vector<double>(sd.begin(), sd.end());
    bundle["mlp"] = nlohmann::json::parse(mlp_to_json(model));
    fs::path path = fs::path(o.out) / "model.json";
    std::ofstream(path) << bundle.dump(2);
    std::cout << "train " << t.task << ": " << to_string(report.stop) << " after "
              << report.iterations << " iterations, final train loss "
              << report.train_loss.back() << " -> " << path.string() << "\n";
    return 0;
}

int cmd_eval(const Options& o) {
    LabeledDataset ds = load_dataset(o);
    fs::path path = o.model.empty() ? fs::path(o.out) / "model.json" : fs::path(o.model);
    std::ifstream in(path);
    if (!in) throw InvalidParameter("cannot open model bundle " + path.string());
    nlohmann::json bundle = nlohmann::json::parse(in);
    TaskData t = task_data(ds, bundle.at("task").get<std::string>());
    PcaModel pca = pca_from_json(bundle.at("pca").dump());
    MlpModel model = mlp_from_json(bundle.at("mlp").dump());
    auto mu_v = bundle.at("score_mean").get<std::vector<double>>();
    auto sd_v = bundle.at("score_sd").get<std::vector<double>>();
    Eigen::RowVectorXd mu = Eigen::Map<Eigen::RowVectorXd>(mu_v.data(), mu_v.size());
    Eigen::RowVectorXd sd = Eigen::Map<Eigen::RowVectorXd>(sd_v.data(), sd_v.size());
    Eigen::MatrixXd z =
        (project(pca, rows_of(ds.X, t.keep)).rowwise() - mu).array().rowwise() / sd.array();

    std::map<std::string, double> metrics;
    nlohmann::json out;
    for (Split split : {Split::Train, Split::Validation, Split::Test}) {
        std::vector<int> rows;
        for (size_t i = 0; i < t.keep.size(); ++i)
            if (ds.meta[t.keep[i]].split == split) rows.push_back(static_cast<int>(i));
        if (rows.empty()) continue;
        std::string tag = t.task + "_" + to_string(split);
        if (t.angular) {
            Eigen::MatrixXd pred = predict_mlp(model, rows_of(z, rows));
            std::vector<double> pd, td;
            for (size_t i = 0; i < rows.size(); ++i) {
                pd.push_back(decode_angle(pred(i, 0), pred(i, 1)));
                td.push_back(t.angle_deg[rows[i]]);
            }
            metrics[tag + "_circular_rmse_deg"] = circular_rmse_deg(pd, td);
            metrics[tag + "_mean_circular_error_deg"] = mean_circular_error_deg(pd, td);
        } else {
            Eigen::VectorXi pred = predict_labels(model, rows_of(z, rows));
            std::vector<int> pv(pred.begin(), pred.end()), tv;
            for (int r : rows) tv.push_back(t.labels[r]);
            ConfusionMatrix cm = compute_confusion(t.task, split, t.classes, tv, pv);
            metrics[tag + "_accuracy"] = cm.accuracy();
            std::vector<std::vector<int>> counts;
            for (int r = 0; r < cm.counts.rows(); ++r)
                counts.emplace_back(cm.counts.row(r).begin(), cm.counts.row(r).end());
            out["confusion"][to_string(split)] = counts;
        }
    }
    out["metrics"] = metrics;
    fs::path mpath = fs::path(o.out) / "metrics.json";
    std::ofstream(mpath) << out.dump(2);
    for (const auto& [k, v] : metrics) std::cout << k << " = " << v << "\n";
    std::cout << "-> " << mpath.string() << "\n";
    return 0;
}

int cmd_experiment(const Options& o, const std::string& which) {
    ExperimentConfig base = experiment_config(o);
    auto run_one = [&](const std::string& name) {
        ExperimentConfig c = base;
        c.out_dir = which == "all" ? (fs::path(o.out) / name).string() : o.out;
        ExperimentReport r = name == "loc"     ? run_location(c)
                             : name == "crack" ? run_crack(c)
                                               : run_health(c);
        std::cout << "[" << name << "]\n";
        for (const auto& [k, v] : r.metrics) std::cout << "  " << k << " = " << v << "\n";
    };
    if (which == "all") {
        run_one("loc");
        run_one("crack");
        run_one("health");
    } else {
        run_one(which);
    }
    return 0;
}

// Scatter of the first two PCA score components, one dot per frame colored by
// class; quick visual check of cluster structure.
int cmd_plot(const Options& o) {
    LabeledDataset ds = load_dataset(o);
    PcaModel pca = fit_pca(rows_of(ds.X, ds.split_rows(Split::Train)), FixedComponents{2});
    Eigen::MatrixXd s = project(pca, ds.X);
    TaskData t = task_data(ds, o.task);
    double sx = s.col(0).cwiseAbs().maxCoeff(), sy = s.col(1).cwiseAbs().maxCoeff();
    if (sx <= 0) sx = 1;
    if (sy <= 0) sy = 1;
    const char* palette[] = {"#1b6ca8", "#d1495b", "#3a7d44", "#e8871e",
                             "#6d4c9f", "#00798c", "#a26769", "#2f2f2f"};
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" "
           "viewBox=\"0 0 640 640\">\n<rect width=\"640\" height=\"640\" fill=\"white\"/>\n";
    for (size_t i = 0; i < t.keep.size(); ++i) {
        double x = 320 + 300 * s(t.keep[i], 0) / sx;
        double y = 320 - 300 * s(t.keep[i], 1) / sy;
        int cls = t.angular ? static_cast<int>(std::lround(t.angle_deg[i] / 30.0)) % 8
                            : t.labels[i];
        svg << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"4\" fill=\"" << palette[cls % 8]
            << "\" fill-opacity=\"0.75\"/>\n";
    }
    svg << "</svg>\n";
    fs::path path = fs::path(o.out) / "pca_scatter.svg";
    std::ofstream(path) << svg.str();
    std::cout << "plot: " << t.keep.size() << " frames -> " << path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"eitsim: EIT tank simulation, reconstruction, and learning pipeline"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "flat key = value config file (flags override file entries)");
    app.allow_config_extras(false);
    app.get_config_formatter_base()->valueSeparator('=');

    Options o;
    bind_options(app, o);

    CLI::App* sub_mesh = app.add_subcommand("mesh", "build the tank mesh and write mesh.json");
    CLI::App* sub_dataset = app.add_subcommand("dataset", "simulate a labeled dataset");
    sub_dataset->add_option("scenario", o.scenario, "loc | crack | health")
        ->required()
        ->check(CLI::IsMember({"loc", "crack", "health"}));
    CLI::App* sub_recon = app.add_subcommand("reconstruct", "difference-image a stored frame");
    CLI::App* sub_pca = app.add_subcommand("pca", "fit PCA on the train split and write scores");
    CLI::App* sub_train = app.add_subcommand("train", "train a network on PCA scores");
    CLI::App* sub_eval = app.add_subcommand("eval", "evaluate a trained model bundle per split");
    CLI::App* sub_exp = app.add_subcommand("experiment", "run a full experiment and write reports");
    std::string which = "all";
    sub_exp->add_option("which", which, "loc | crack | health | all")
        ->required()
        ->check(CLI::IsMember({"loc", "crack", "health", "all"}));
    CLI::App* sub_plot = app.add_subcommand("plot", "scatter the first two PCA components");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        write_snapshot(app, o, argc, argv);
        if (sub_mesh->parsed()) return cmd_mesh(o);
        if (sub_dataset->parsed()) return cmd_dataset(o);
        if (sub_recon->parsed()) return cmd_reconstruct(o);
        if (sub_pca->parsed()) return cmd_pca(o);
        if (sub_train->parsed()) return cmd_train(o);
        if (sub_eval->parsed()) return cmd_eval(o);
        if (sub_exp->parsed()) return cmd_experiment(o, which);
        if (sub_plot->parsed()) return cmd_plot(o);
    } catch (const InvalidParameter& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DimensionMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DegenerateData& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
