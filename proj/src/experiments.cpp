#include "eitsim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "eitsim/learners.hpp"
#include "eitsim/recon.hpp"
#include "eitsim/rng.hpp"

namespace eitsim {

ConfusionMatrix compute_confusion(const std::string& task, Split split,
                                  const std::vector<std::string>& classes, const std::vector<int>& truth,
                                  const std::vector<int>& predictions) {
    if (truth.size() != predictions.size()) throw DimensionMismatch("prediction/truth length mismatch");
    const int c = static_cast<int>(classes.size());
    ConfusionMatrix cm;
    cm.task = task;
    cm.split = split;
    cm.classes = classes;
    cm.counts = Eigen::MatrixXi::Zero(c, c);
    for (size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= c || predictions[i] < 0 || predictions[i] >= c)
            throw InvalidParameter("class index out of range");
        ++cm.counts(truth[i], predictions[i]);
    }
    return cm;
}

double rmse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truth) {
    if (predictions.size() != truth.size()) throw DimensionMismatch("prediction/truth length mismatch");
    if (predictions.size() == 0) return 0.0;
    return std::sqrt((predictions - truth).squaredNorm() / predictions.size());
}

double circular_rmse_deg(const std::vector<double>& pred_deg, const std::vector<double>& truth_deg) {
    if (pred_deg.size() != truth_deg.size()) throw DimensionMismatch("prediction/truth length mismatch");
    if (pred_deg.empty()) return 0.0;
    double se = 0.0;
    for (size_t i = 0; i < pred_deg.size(); ++i) {
        double e = circular_error(pred_deg[i], truth_deg[i]);
        se += e * e;
    }
    return std::sqrt(se / pred_deg.size());
}

double mean_circular_error_deg(const std::vector<double>& pred_deg, const std::vector<double>& truth_deg) {
    if (pred_deg.size() != truth_deg.size()) throw DimensionMismatch("prediction/truth length mismatch");
    if (pred_deg.empty()) return 0.0;
    double sum = 0.0;
    for (size_t i = 0; i < pred_deg.size(); ++i) sum += circular_error(pred_deg[i], truth_deg[i]);
    return sum / pred_deg.size();
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    const DatasetConfig& d = c.dataset;
    j["dataset"] = {{"tank_radius", d.tank_radius},
                    {"refinement_level", d.refinement_level},
                    {"electrode_coverage", d.electrode_coverage},
                    {"current_amplitude", d.current_amplitude},
                    {"contact_impedance", d.contact_impedance},
                    {"specimens", d.specimens},
                    {"health_specimens", d.health_specimens},
                    {"fixed_load", d.fixed_load},
                    {"load_min", d.load_min},
                    {"load_max", d.load_max},
                    {"load_steps", d.load_steps},
                    {"split_mode", to_string(d.split_mode)},
                    {"seed", d.seed},
                    {"jobs", d.jobs}};
    j["materials"] = {{"sigma_water", d.materials.sigma_water},
                      {"sigma_specimen", d.materials.sigma_specimen},
                      {"alpha_healthy", d.materials.alpha_healthy},
                      {"alpha_loose", d.materials.alpha_loose},
                      {"alpha_vcrack", d.materials.alpha_vcrack},
                      {"alpha_hcrack", d.materials.alpha_hcrack},
                      {"horizontal_derating", d.materials.horizontal_derating},
                      {"gap_width", d.materials.gap_width},
                      {"slit_width", d.materials.slit_width},
                      {"specimen_radius", d.materials.specimen_radius},
                      {"male_radius", d.materials.male_radius},
                      {"max_load", d.materials.max_load}};
    j["noise"] = {{"per_reading_sd", d.noise.per_reading_sd},
                  {"readings_per_measurement", d.noise.readings_per_measurement},
                  {"specimen_sigma_jitter", d.noise.specimen_sigma_jitter},
                  {"position_jitter", d.noise.position_jitter},
                  {"angle_jitter", d.noise.angle_jitter}};
    j["pca_components"] = c.pca_components;
    j["mlp_hidden_loc"] = c.mlp_hidden_loc;
    j["mlp_hidden_crack"] = c.mlp_hidden_crack;
    j["mlp_hidden_health"] = c.mlp_hidden_health;
    j["knn_k"] = c.knn_k;
    j["svm_c"] = c.svm_c;
    j["train_seed"] = c.train_seed;
    j["heatmap_samples"] = c.heatmap_samples;
    return j.dump(2);
}

std::string ExperimentReport::to_json() const {
    nlohmann::json j;
    j["experiment"] = experiment;
    j["metrics"] = metrics;  // std::map: keys serialized in sorted order
    j["pca_explained_ratio"] = pca_explained_ratio;
    auto& cms = j["confusions"] = nlohmann::json::array();
    for (const auto& cm : confusions) {
        nlohmann::json e;
        e["task"] = cm.task;
        e["split"] = to_string(cm.split);
        e["classes"] = cm.classes;
        auto& rows = e["counts"] = nlohmann::json::array();
        for (int i = 0; i < cm.counts.rows(); ++i) {
            std::vector<int> row(cm.counts.cols());
            for (int k = 0; k < cm.counts.cols(); ++k) row[k] = cm.counts(i, k);
            rows.push_back(row);
        }
        e["accuracy"] = cm.accuracy();
        cms.push_back(e);
    }
    j["artifacts"] = artifacts;
    j["config"] = nlohmann::json::parse(config_json);
    return j.dump(2);
}

namespace {

constexpr Split kSplits[] = {Split::Train, Split::Validation, Split::Test};

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<int>& rows) {
    Eigen::MatrixXd out(rows.size(), x.cols());
    for (size_t i = 0; i < rows.size(); ++i) out.row(i) = x.row(rows[i]);
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text,
                std::vector<std::string>& artifacts) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidParameter("cannot open " + path.string());
    f << text;
    artifacts.push_back(path.string());
}

std::string confusion_csv(const ConfusionMatrix& cm) {
    std::ostringstream s;
    s << "truth\\prediction";
    for (const auto& c : cm.classes) s << ',' << c;
    s << "\n";
    for (int i = 0; i < cm.counts.rows(); ++i) {
        s << cm.classes[i];
        for (int k = 0; k < cm.counts.cols(); ++k) s << ',' << cm.counts(i, k);
        s << "\n";
    }
    return s.str();
}

struct Prepared {
    LabeledDataset ds;
    PcaModel pca;
    Eigen::MatrixXd scores;                 // all rows, raw projection
    std::vector<int> rows[3];               // per split
    Eigen::MatrixXd split_scores[3];        // standardized on train statistics
};

// z-scores the projections with train-split statistics so learner inputs are
// O(1) regardless of the physical voltage scale
void standardize(Prepared& p) {
    Eigen::MatrixXd train = take_rows(p.scores, p.rows[0]);
    Eigen::RowVectorXd mean = train.colwise().mean();
    Eigen::RowVectorXd sd =
        ((train.rowwise() - mean).cwiseAbs2().colwise().sum() / (train.rows() - 1.0)).cwiseSqrt();
    for (int i = 0; i < sd.size(); ++i)
        if (sd[i] <= 0.0) sd[i] = 1.0;
    Eigen::MatrixXd z = (p.scores.rowwise() - mean).array().rowwise() / sd.array();
    for (int s = 0; s < 3; ++s) p.split_scores[s] = take_rows(z, p.rows[s]);
}

Prepared prepare(ScenarioKind kind, const ExperimentConfig& cfg) {
    Prepared p;
    p.ds = generate_dataset(kind, cfg.dataset);
    for (int s = 0; s < 3; ++s) p.rows[s] = p.ds.split_rows(kSplits[s]);
    p.pca = fit_pca(take_rows(p.ds.X, p.rows[0]), FixedComponents{cfg.pca_components});
    p.scores = project(p.pca, p.ds.X);
    standardize(p);
    return p;
}

void record_ratios(ExperimentReport& report, const PcaModel& pca) {
    report.pca_explained_ratio.assign(pca.explained_ratio.begin(), pca.explained_ratio.end());
}

// angle regression through the sin/cos codec; returns decoded degrees
std::vector<double> decode_rows(const Eigen::MatrixXd& sincos) {
    std::vector<double> out(sincos.rows());
    for (int i = 0; i < sincos.rows(); ++i) out[i] = decode_angle(sincos(i, 0), sincos(i, 1));
    return out;
}

Eigen::MatrixXd encode_targets(const std::vector<double>& deg) {
    Eigen::MatrixXd y(deg.size(), 2);
    for (size_t i = 0; i < deg.size(); ++i) y.row(i) = encode_angle(deg[i]).transpose();
    return y;
}

void emit_heatmaps(const ExperimentConfig& cfg, const Prepared& p, ExperimentReport& report) {
    if (cfg.out_dir.empty() || cfg.heatmap_samples <= 0 || p.rows[2].empty()) return;
    const DatasetConfig& d = cfg.dataset;
    Mesh mesh = build_mesh(d.tank_radius, d.refinement_level, d.electrode_coverage);
    auto proto = DriveProtocol::adjacent(d.current_amplitude);
    ConductivityField water;
    water.sigma = Eigen::VectorXd::Constant(mesh.num_elements(), d.materials.sigma_water);
    Reconstructor recon(mesh, proto, ReconConfig{}, water, d.contact_impedance);
    int n = std::min<int>(cfg.heatmap_samples, p.rows[2].size());
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd ds = recon.reconstruct(p.ds.X.row(p.rows[2][i]).transpose());
        write_text(std::filesystem::path(cfg.out_dir) / ("heatmap_test_" + std::to_string(i) + ".svg"),
                   render_heatmap(mesh, ds), report.artifacts);
    }
}

void finish(const ExperimentConfig& cfg, ExperimentReport& report) {
    if (cfg.out_dir.empty()) return;
    std::filesystem::path dir(cfg.out_dir);
    write_text(dir / "config.json", report.config_json, report.artifacts);
    for (const auto& cm : report.confusions)
        write_text(dir / ("confusion_" + cm.task + "_" + to_string(cm.split) + ".csv"), confusion_csv(cm),
                   report.artifacts);
    // the report itself lists everything written before it
    std::filesystem::path report_path = dir / "report.json";
    report.artifacts.push_back(report_path.string());
    std::filesystem::create_directories(dir);
    std::ofstream f(report_path, std::ios::binary);
    f << report.to_json();
}

double losses_strictly_decreasing(const TrainReport& tr) {
    for (size_t i = 1; i < tr.train_loss.size(); ++i)
        if (!(tr.train_loss[i] < tr.train_loss[i - 1])) return 0.0;
    return 1.0;
}

void classification_block(ExperimentReport& report, const ExperimentConfig& cfg, const Prepared& p,
                          const std::string& task, const std::vector<std::string>& classes,
                          const std::vector<int>& labels_all, int hidden, bool with_baselines) {
    std::vector<int> y[3];
    for (int s = 0; s < 3; ++s)
        for (int r : p.rows[s]) y[s].push_back(labels_all[r]);

    MlpTrainConfig tc;
    tc.hidden_size = hidden;
    tc.task = MlpTask::Classification;
    tc.seed = cfg.train_seed;
    auto [mlp, tr] = train_mlp(p.split_scores[0], one_hot(y[0], classes.size()), p.split_scores[1],
                               one_hot(y[1], classes.size()), tc);
    report.metrics[task + "_mlp_stop_" + to_string(tr.stop)] = 1.0;
    report.metrics[task + "_mlp_loss_strictly_decreasing"] = losses_strictly_decreasing(tr);
    for (int s = 0; s < 3; ++s) {
        Eigen::VectorXi pred = predict_labels(mlp, p.split_scores[s]);
        std::vector<int> pv(pred.begin(), pred.end());
        ConfusionMatrix cm = compute_confusion(task + "_mlp", kSplits[s], classes, y[s], pv);
        report.metrics[task + "_mlp_" + to_string(kSplits[s]) + "_accuracy"] = cm.accuracy();
        report.confusions.push_back(cm);
    }

    if (!with_baselines) return;
    LinearSvmModel svm = train_linear_svm(p.split_scores[0], y[0], cfg.svm_c, 1000, cfg.train_seed);
    for (int s = 0; s < 3; ++s) {
        Eigen::VectorXi pred = predict_svm_batch(svm, p.split_scores[s]);
        int hit = 0;
        for (int i = 0; i < pred.size(); ++i) hit += pred[i] == y[s][i];
        report.metrics[task + "_svm_" + to_string(kSplits[s]) + "_accuracy"] =
            y[s].empty() ? 0.0 : double(hit) / y[s].size();
    }
    for (int s = 0; s < 3; ++s) {
        Eigen::VectorXi pred = knn_batch(p.split_scores[0], y[0], cfg.knn_k, p.split_scores[s]);
        int hit = 0;
        for (int i = 0; i < pred.size(); ++i) hit += pred[i] == y[s][i];
        report.metrics[task + "_knn_" + to_string(kSplits[s]) + "_accuracy"] =
            y[s].empty() ? 0.0 : double(hit) / y[s].size();
    }
}

}  // namespace

ExperimentReport run_location(const ExperimentConfig& cfg) {
    ExperimentReport report;
    report.experiment = "loc";
    report.config_json = experiment_config_to_json(cfg);

    Prepared p = prepare(ScenarioKind::LOC, cfg);
    record_ratios(report, p.pca);

    // radial task: 3-class r in {0, 2, 4} cm
    std::vector<std::string> classes = {"r0", "r2", "r4"};
    std::vector<int> radial(p.ds.rows());
    for (int i = 0; i < p.ds.rows(); ++i)
        radial[i] = static_cast<int>(std::lround(p.ds.meta[i].r_cm / 2.0));
    classification_block(report, cfg, p, "radial", classes, radial, cfg.mlp_hidden_loc, true);

    // angular task: sin/cos regression on the off-center rows
    Prepared ang;
    ang.ds = p.ds;
    for (int s = 0; s < 3; ++s)
        for (int r : p.rows[s])
            if (p.ds.meta[r].r_cm > 0.5) ang.rows[s].push_back(r);
    ang.pca = fit_pca(take_rows(p.ds.X, ang.rows[0]), FixedComponents{cfg.pca_components});
    ang.scores = project(ang.pca, p.ds.X);
    standardize(ang);

    std::vector<double> theta[3];
    for (int s = 0; s < 3; ++s)
        for (int r : ang.rows[s]) theta[s].push_back(p.ds.meta[r].theta_deg);

    MlpTrainConfig tc;
    tc.hidden_size = cfg.mlp_hidden_loc;
    tc.seed = cfg.train_seed;
    auto [mlp, tr] = train_mlp(ang.split_scores[0], encode_targets(theta[0]), ang.split_scores[1],
                               encode_targets(theta[1]), tc);
    report.metrics["angular_mlp_stop_" + to_string(tr.stop)] = 1.0;
    report.metrics["angular_mlp_loss_strictly_decreasing"] = losses_strictly_decreasing(tr);
    for (int s = 0; s < 3; ++s) {
        std::vector<double> pred = decode_rows(predict_mlp(mlp, ang.split_scores[s]));
        report.metrics["angular_mlp_" + to_string(kSplits[s]) + "_mean_circular_error_deg"] =
            mean_circular_error_deg(pred, theta[s]);
        report.metrics["angular_mlp_" + to_string(kSplits[s]) + "_circular_rmse_deg"] =
            circular_rmse_deg(pred, theta[s]);
    }

    emit_heatmaps(cfg, p, report);
    finish(cfg, report);
    return report;
}

ExperimentReport run_crack(const ExperimentConfig& cfg) {
    ExperimentReport report;
    report.experiment = "crack";
    report.config_json = experiment_config_to_json(cfg);

    Prepared p = prepare(ScenarioKind::CRACK, cfg);
    record_ratios(report, p.pca);

    std::vector<double> theta[3];
    for (int s = 0; s < 3; ++s)
        for (int r : p.rows[s]) theta[s].push_back(p.ds.meta[r].crack_deg);

    MlpTrainConfig tc;
    tc.hidden_size = cfg.mlp_hidden_crack;
    tc.seed = cfg.train_seed;
    auto [mlp, tr] = train_mlp(p.split_scores[0], encode_targets(theta[0]), p.split_scores[1],
                               encode_targets(theta[1]), tc);
    report.metrics["crack_mlp_stop_" + to_string(tr.stop)] = 1.0;
    report.metrics["crack_mlp_loss_strictly_decreasing"] = losses_strictly_decreasing(tr);
    std::vector<double> mlp_pred[3];
    for (int s = 0; s < 3; ++s) {
        mlp_pred[s] = decode_rows(predict_mlp(mlp, p.split_scores[s]));
        report.metrics["crack_mlp_" + to_string(kSplits[s]) + "_circular_rmse_deg"] =
            circular_rmse_deg(mlp_pred[s], theta[s]);
    }

    // GPR: one regressor per codec component
    Eigen::MatrixXd y_train = encode_targets(theta[0]);
    GprModel gpr_sin = train_gpr(p.split_scores[0], y_train.col(0), {});
    GprModel gpr_cos = train_gpr(p.split_scores[0], y_train.col(1), {});
    for (int s = 0; s < 3; ++s) {
        std::vector<double> pred;
        for (int i = 0; i < p.split_scores[s].rows(); ++i) {
            Eigen::VectorXd q = p.split_scores[s].row(i).transpose();
            pred.push_back(decode_angle(predict_gpr(gpr_sin, q).first, predict_gpr(gpr_cos, q).first));
        }
        report.metrics["crack_gpr_" + to_string(kSplits[s]) + "_circular_rmse_deg"] =
            circular_rmse_deg(pred, theta[s]);
    }

    // 30-degree binning for accuracy comparison against the reconstruction baseline
    auto to_bin = [](double deg) {
        int b = static_cast<int>(std::lround(deg / 30.0)) % 12;
        return b < 0 ? b + 12 : b;
    };
    auto binned_accuracy = [&](const std::vector<double>& pred, const std::vector<double>& truth) {
        int hit = 0;
        for (size_t i = 0; i < pred.size(); ++i) hit += to_bin(pred[i]) == to_bin(truth[i]);
        return pred.empty() ? 0.0 : double(hit) / pred.size();
    };
    report.metrics["crack_mlp_test_binned_accuracy"] = binned_accuracy(mlp_pred[2], theta[2]);

    // nearest-centroid on reconstructed conductivity maps
    const DatasetConfig& d = cfg.dataset;
    Mesh mesh = build_mesh(d.tank_radius, d.refinement_level, d.electrode_coverage);
    auto proto = DriveProtocol::adjacent(d.current_amplitude);
    ConductivityField water;
    water.sigma = Eigen::VectorXd::Constant(mesh.num_elements(), d.materials.sigma_water);
    Reconstructor recon(mesh, proto, ReconConfig{}, water, d.contact_impedance);

    Eigen::MatrixXd centroid = Eigen::MatrixXd::Zero(12, mesh.num_elements());
    Eigen::VectorXd count = Eigen::VectorXd::Zero(12);
    for (size_t i = 0; i < p.rows[0].size(); ++i) {
        int b = to_bin(theta[0][i]);
        centroid.row(b) += recon.reconstruct(p.ds.X.row(p.rows[0][i]).transpose()).transpose();
        count[b] += 1.0;
    }
    for (int b = 0; b < 12; ++b)
        if (count[b] > 0) centroid.row(b) /= count[b];
    int hit = 0;
    for (size_t i = 0; i < p.rows[2].size(); ++i) {
        Eigen::VectorXd map = recon.reconstruct(p.ds.X.row(p.rows[2][i]).transpose());
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int b = 0; b < 12; ++b) {
            double dist = (centroid.row(b).transpose() - map).squaredNorm();
            if (dist < best_d) {
                best_d = dist;
                best = b;
            }
        }
        hit += best == to_bin(theta[2][i]);
    }
    report.metrics["crack_recon_centroid_test_accuracy"] =
        p.rows[2].empty() ? 0.0 : double(hit) / p.rows[2].size();

    emit_heatmaps(cfg, p, report);
    finish(cfg, report);
    return report;
}

ExperimentReport run_health(const ExperimentConfig& cfg) {
    ExperimentReport report;
    report.experiment = "health";
    report.config_json = experiment_config_to_json(cfg);

    Prepared p = prepare(ScenarioKind::HEALTH, cfg);
    record_ratios(report, p.pca);

    std::vector<std::string> classes = {"healthy", "vertical_crack", "horizontal_crack", "loose"};
    std::vector<int> labels(p.ds.rows());
    for (int i = 0; i < p.ds.rows(); ++i) labels[i] = static_cast<int>(*p.ds.meta[i].condition);

    classification_block(report, cfg, p, "health", classes, labels, cfg.mlp_hidden_health, false);

    // KNN with five-fold cross validation on the training portion
    std::vector<int> y_train;
    for (int r : p.rows[0]) y_train.push_back(labels[r]);
    std::vector<int> order(p.rows[0].size());
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(cfg.dataset.seed, "cv-fold", 0);
    std::shuffle(order.begin(), order.end(), rng);
    double cv_hit = 0.0;
    for (int fold = 0; fold < 5; ++fold) {
        std::vector<int> hold, rest;
        for (size_t i = 0; i < order.size(); ++i)
            (static_cast<int>(i) % 5 == fold ? hold : rest).push_back(order[i]);
        Eigen::MatrixXd xr = take_rows(p.split_scores[0], rest);
        std::vector<int> yr;
        for (int i : rest) yr.push_back(y_train[i]);
        for (int i : hold)
            cv_hit += knn(xr, yr, cfg.knn_k, p.split_scores[0].row(i).transpose()) == y_train[i];
    }
    report.metrics["health_knn_cv_accuracy"] = cv_hit / order.size();

    for (int s = 0; s < 3; ++s) {
        std::vector<int> truth;
        for (int r : p.rows[s]) truth.push_back(labels[r]);
        Eigen::VectorXi pred = knn_batch(p.split_scores[0], y_train, cfg.knn_k, p.split_scores[s]);
        std::vector<int> pv(pred.begin(), pred.end());
        ConfusionMatrix cm = compute_confusion("health_knn", kSplits[s], classes, truth, pv);
        report.metrics["health_knn_" + to_string(kSplits[s]) + "_accuracy"] = cm.accuracy();
        report.confusions.push_back(cm);
    }

    // cumulative explained variance of the leading 4 and 7 components
    int d7 = std::min<int>(7, p.ds.X.cols());
    PcaModel pca7 = fit_pca(take_rows(p.ds.X, p.rows[0]), FixedComponents{d7});
    report.metrics["health_pca_cum_ratio_4"] = pca7.explained_ratio.head(std::min(4, d7)).sum();
    report.metrics["health_pca_cum_ratio_7"] = pca7.explained_ratio.sum();

    // cluster separation in the first two components: centroid gap vs twice the
    // mean within-class deviation
    Eigen::MatrixXd two = p.scores.leftCols(2);
    Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(4, 2);
    Eigen::VectorXd n_of = Eigen::VectorXd::Zero(4);
    for (int i = 0; i < p.ds.rows(); ++i) {
        centroids.row(labels[i]) += two.row(i);
        n_of[labels[i]] += 1.0;
    }
    for (int c = 0; c < 4; ++c) centroids.row(c) /= n_of[c];
    Eigen::VectorXd spread = Eigen::VectorXd::Zero(4);
    for (int i = 0; i < p.ds.rows(); ++i)
        spread[labels[i]] += (two.row(i) - centroids.row(labels[i])).norm();
    int separated = 0;
    for (int c = 0; c < 4; ++c) {
        spread[c] /= n_of[c];
        double nearest = std::numeric_limits<double>::infinity();
        for (int o = 0; o < 4; ++o)
            if (o != c) nearest = std::min(nearest, (centroids.row(c) - centroids.row(o)).norm());
        if (nearest > 2.0 * spread[c]) ++separated;
    }
    report.metrics["health_cluster_separated_classes"] = separated;

    // load-response ordering of the noise-free fields at every load step
    const DatasetConfig& d = cfg.dataset;
    Mesh mesh = build_mesh(d.tank_radius, d.refinement_level, d.electrode_coverage);
    int steps_ok = 0;
    for (int l = 0; l < d.load_steps; ++l) {
        double load = d.load_min + (d.load_max - d.load_min) * l / (d.load_steps - 1);
        double mean_ds[4];
        for (Condition c : {Condition::Healthy, Condition::VerticalCrack, Condition::HorizontalCrack,
                            Condition::Loose}) {
            Scenario sc{ScenarioKind::HEALTH, 0.0, 0.0, 0.0, c, load, 0};
            ConductivityField f = render_field(mesh, sc, d.materials);
            double acc = 0.0, area = 0.0;
            for (int k = 0; k < mesh.num_elements(); ++k) {
                acc += std::fabs(f.sigma[k] - d.materials.sigma_water) * mesh.geometry[k].area;
                area += mesh.geometry[k].area;
            }
            mean_ds[static_cast<int>(c)] = acc / area;
        }
        bool ok = mean_ds[0] > mean_ds[3] && mean_ds[3] > mean_ds[1] && mean_ds[1] > mean_ds[2];
        steps_ok += ok;
    }
    report.metrics["health_ordering_load_steps_ok"] = steps_ok;

    if (!cfg.out_dir.empty()) {
        std::ostringstream scatter;
        scatter << "pc1,pc2,condition,split\n";
        scatter.precision(17);
        for (int i = 0; i < p.ds.rows(); ++i)
            scatter << two(i, 0) << ',' << two(i, 1) << ',' << classes[labels[i]] << ','
                    << to_string(p.ds.meta[i].split) << "\n";
        write_text(std::filesystem::path(cfg.out_dir) / "pca_scatter.csv", scatter.str(),
                   report.artifacts);
    }

    emit_heatmaps(cfg, p, report);
    finish(cfg, report);
    return report;
}

}  // namespace eitsim
