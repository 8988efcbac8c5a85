#include "eitsim/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "eitsim/rng.hpp"

namespace eitsim {

std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::MaxIter: return "max_iter";
        case StopReason::GradTol: return "grad_tol";
        case StopReason::MuOverflow: return "mu_overflow";
        case StopReason::EarlyStop: return "early_stop";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// MLP + Levenberg-Marquardt
// ---------------------------------------------------------------------------

Eigen::MatrixXd predict_mlp(const MlpModel& model, const Eigen::MatrixXd& x) {
    if (x.cols() != model.inputs()) throw DimensionMismatch("input width does not match the network");
    Eigen::MatrixXd h = ((x * model.W1.transpose()).rowwise() + model.b1.transpose()).array().tanh();
    return (h * model.W2.transpose()).rowwise() + model.b2.transpose();
}

Eigen::VectorXi predict_labels(const MlpModel& model, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out = predict_mlp(model, x);
    Eigen::VectorXi labels(out.rows());
    for (int i = 0; i < out.rows(); ++i) {
        int arg = 0;
        out.row(i).maxCoeff(&arg);
        labels[i] = arg;
    }
    return labels;
}

Eigen::MatrixXd one_hot(const std::vector<int>& labels, int num_classes) {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(labels.size(), num_classes);
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes) throw InvalidParameter("label out of range");
        y(i, labels[i]) = 1.0;
    }
    return y;
}

Eigen::VectorXd mlp_pack(const MlpModel& m) {
    Eigen::VectorXd theta(m.W1.size() + m.b1.size() + m.W2.size() + m.b2.size());
    int at = 0;
    for (int i = 0; i < m.W1.rows(); ++i)
        for (int j = 0; j < m.W1.cols(); ++j) theta[at++] = m.W1(i, j);
    for (int i = 0; i < m.b1.size(); ++i) theta[at++] = m.b1[i];
    for (int i = 0; i < m.W2.rows(); ++i)
        for (int j = 0; j < m.W2.cols(); ++j) theta[at++] = m.W2(i, j);
    for (int i = 0; i < m.b2.size(); ++i) theta[at++] = m.b2[i];
    return theta;
}

void mlp_unpack(MlpModel& m, const Eigen::VectorXd& theta) {
    int at = 0;
    for (int i = 0; i < m.W1.rows(); ++i)
        for (int j = 0; j < m.W1.cols(); ++j) m.W1(i, j) = theta[at++];
    for (int i = 0; i < m.b1.size(); ++i) m.b1[i] = theta[at++];
    for (int i = 0; i < m.W2.rows(); ++i)
        for (int j = 0; j < m.W2.cols(); ++j) m.W2(i, j) = theta[at++];
    for (int i = 0; i < m.b2.size(); ++i) m.b2[i] = theta[at++];
}

double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    return (predict_mlp(model, x) - y).squaredNorm() / x.rows();
}

void mlp_residuals(const MlpModel& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                   Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
    const int n = static_cast<int>(x.rows());
    const int in = m.inputs(), hid = m.hidden(), out = m.outputs();
    const int params = hid * in + hid + out * hid + out;
    r.resize(n * out);
    jac.setZero(n * out, params);

    const int off_b1 = hid * in;
    const int off_w2 = off_b1 + hid;
    const int off_b2 = off_w2 + out * hid;

    for (int s = 0; s < n; ++s) {
        Eigen::VectorXd h = (m.W1 * x.row(s).transpose() + m.b1).array().tanh();
        Eigen::VectorXd o = m.W2 * h + m.b2;
        Eigen::VectorXd dh = 1.0 - h.array().square();  // tanh'
        for (int j = 0; j < out; ++j) {
            int row = s * out + j;
            r[row] = o[j] - y(s, j);
            for (int i = 0; i < hid; ++i) {
                double back = m.W2(j, i) * dh[i];
                for (int c = 0; c < in; ++c) jac(row, i * in + c) = back * x(s, c);
                jac(row, off_b1 + i) = back;
                jac(row, off_w2 + j * hid + i) = h[i];
            }
            jac(row, off_b2 + j) = 1.0;
        }
    }
}

std::pair<MlpModel, TrainReport> train_mlp(const Eigen::MatrixXd& x_train, const Eigen::MatrixXd& y_train,
                                           const Eigen::MatrixXd& x_val, const Eigen::MatrixXd& y_val,
                                           const MlpTrainConfig& config) {
    if (x_train.rows() != y_train.rows()) throw DimensionMismatch("row counts of inputs and targets differ");
    if (config.hidden_size < 1) throw InvalidParameter("hidden_size must be positive");
    if (x_train.rows() < config.hidden_size + 1)
        throw InvalidParameter("need at least hidden_size + 1 training rows");
    const bool has_val = x_val.rows() > 0;
    if (has_val && (x_val.cols() != x_train.cols() || y_val.cols() != y_train.cols() ||
                    x_val.rows() != y_val.rows()))
        throw DimensionMismatch("validation set shape mismatch");

    MlpModel m;
    m.task = config.task;
    m.seed = config.seed;
    m.W1.resize(config.hidden_size, x_train.cols());
    m.b1.resize(config.hidden_size);
    m.W2.resize(y_train.cols(), config.hidden_size);
    m.b2.resize(y_train.cols());

    auto rng = make_rng(config.seed, "mlp-init", 0);
    std::uniform_real_distribution<double> unit(-0.5, 0.5);
    double s1 = 1.0 / std::sqrt(static_cast<double>(x_train.cols()));
    double s2 = 1.0 / std::sqrt(static_cast<double>(config.hidden_size));
    for (int i = 0; i < m.W1.rows(); ++i)
        for (int j = 0; j < m.W1.cols(); ++j) m.W1(i, j) = unit(rng) * s1;
    for (int i = 0; i < m.b1.size(); ++i) m.b1[i] = unit(rng) * s1;
    for (int i = 0; i < m.W2.rows(); ++i)
        for (int j = 0; j < m.W2.cols(); ++j) m.W2(i, j) = unit(rng) * s2;
    for (int i = 0; i < m.b2.size(); ++i) m.b2[i] = unit(rng) * s2;

    TrainReport report;
    double loss = mlp_loss(m, x_train, y_train);
    if (!std::isfinite(loss)) throw SolverError("non-finite training loss");

    double mu = config.mu_init;
    Eigen::VectorXd theta = mlp_pack(m);
    Eigen::VectorXd best_theta = theta;
    double best_val = has_val ? mlp_loss(m, x_val, y_val) : 0.0;
    double prev_val = best_val;
    int val_increases = 0;

    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    report.stop = StopReason::MaxIter;
    int iter = 0;
    for (; iter < config.max_iterations; ++iter) {
        mlp_residuals(m, x_train, y_train, r, jac);
        Eigen::VectorXd grad = jac.transpose() * r;
        if (grad.cwiseAbs().maxCoeff() < config.grad_tol) {
            report.stop = StopReason::GradTol;
            break;
        }
        Eigen::MatrixXd hess = jac.transpose() * jac;

        bool accepted = false;
        while (true) {
            Eigen::MatrixXd damped = hess;
            damped.diagonal().array() += mu;
            Eigen::VectorXd delta = damped.ldlt().solve(-grad);
            MlpModel trial = m;
            mlp_unpack(trial, theta + delta);
            double trial_loss = mlp_loss(trial, x_train, y_train);
            if (std::isfinite(trial_loss) && trial_loss < loss) {
                theta += delta;
                m = trial;
                loss = trial_loss;
                mu /= 10.0;
                accepted = true;
                break;
            }
            mu *= 10.0;
            if (mu > config.mu_max) break;
        }
        if (!accepted) {
            report.stop = StopReason::MuOverflow;
            break;
        }

        report.train_loss.push_back(loss);
        if (has_val) {
            double val = mlp_loss(m, x_val, y_val);
            report.val_loss.push_back(val);
            if (val < best_val) {
                best_val = val;
                best_theta = theta;
            }
            val_increases = val > prev_val ? val_increases + 1 : 0;
            prev_val = val;
            if (val_increases >= config.patience) {
                mlp_unpack(m, best_theta);
                report.stop = StopReason::EarlyStop;
                ++iter;
                break;
            }
        }
    }
    report.iterations = iter;
    return {m, report};
}

std::string mlp_to_json(const MlpModel& m) {
    nlohmann::json j;
    j["task"] = m.task == MlpTask::Classification ? "classification" : "regression";
    j["seed"] = m.seed;
    j["inputs"] = m.inputs();
    j["hidden"] = m.hidden();
    j["outputs"] = m.outputs();
    Eigen::VectorXd theta = mlp_pack(m);
    j["theta"] = std::vector<double>(theta.begin(), theta.end());
    return j.dump();
}

MlpModel mlp_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    MlpModel m;
    m.task = j.at("task") == "classification" ? MlpTask::Classification : MlpTask::Regression;
    m.seed = j.at("seed").get<std::uint64_t>();
    int in = j.at("inputs"), hid = j.at("hidden"), out = j.at("outputs");
    m.W1.resize(hid, in);
    m.b1.resize(hid);
    m.W2.resize(out, hid);
    m.b2.resize(out);
    auto theta = j.at("theta").get<std::vector<double>>();
    if (static_cast<int>(theta.size()) != hid * in + hid + out * hid + out)
        throw InvalidParameter("parameter vector does not match the stated shape");
    mlp_unpack(m, Eigen::Map<Eigen::VectorXd>(theta.data(), theta.size()));
    return m;
}

// ---------------------------------------------------------------------------
// KNN
// ---------------------------------------------------------------------------

int knn(const Eigen::MatrixXd& train_x, const std::vector<int>& train_labels, int k,
        const Eigen::VectorXd& query) {
    const int n = static_cast<int>(train_x.rows());
    if (n == 0) throw InvalidParameter("knn requires a non-empty training set");
    if (static_cast<int>(train_labels.size()) != n) throw DimensionMismatch("label count mismatch");
    if (k < 1) throw InvalidParameter("k must be >= 1");
    if (query.size() != train_x.cols()) throw DimensionMismatch("query width mismatch");
    k = std::min(k, n);

    std::vector<std::pair<double, int>> by_dist(n);
    for (int i = 0; i < n; ++i)
        by_dist[i] = {(train_x.row(i).transpose() - query).squaredNorm(), i};
    std::partial_sort(by_dist.begin(), by_dist.begin() + k, by_dist.end());

    std::map<int, int> votes;
    for (int i = 0; i < k; ++i) ++votes[train_labels[by_dist[i].second]];
    int best_count = 0;
    for (const auto& [label, count] : votes) best_count = std::max(best_count, count);

    // tie break: nearest neighbor among tied classes, then lowest class index
    double best_dist = std::numeric_limits<double>::infinity();
    int best_label = std::numeric_limits<int>::max();
    for (int i = 0; i < k; ++i) {
        int label = train_labels[by_dist[i].second];
        if (votes[label] != best_count) continue;
        if (by_dist[i].first < best_dist ||
            (by_dist[i].first == best_dist && label < best_label)) {
            best_dist = by_dist[i].first;
            best_label = label;
        }
    }
    return best_label;
}

Eigen::VectorXi knn_batch(const Eigen::MatrixXd& train_x, const std::vector<int>& train_labels, int k,
                          const Eigen::MatrixXd& queries) {
    Eigen::VectorXi out(queries.rows());
    for (int i = 0; i < queries.rows(); ++i)
        out[i] = knn(train_x, train_labels, k, queries.row(i).transpose());
    return out;
}

// ---------------------------------------------------------------------------
// linear SVM
// ---------------------------------------------------------------------------

namespace {

double hinge_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& y, double lambda) {
    Eigen::VectorXd margins =
        Eigen::VectorXd::Ones(x.rows()) - y.cwiseProduct(x * w + Eigen::VectorXd::Constant(x.rows(), b));
    return 0.5 * lambda * w.squaredNorm() + margins.cwiseMax(0.0).mean();
}

}  // namespace

LinearSvmModel train_linear_svm(const Eigen::MatrixXd& x, const std::vector<int>& labels, double C,
                                int epochs, std::uint64_t seed) {
    const int n = static_cast<int>(x.rows());
    if (static_cast<int>(labels.size()) != n) throw DimensionMismatch("label count mismatch");
    if (C <= 0.0 || epochs < 1) throw InvalidParameter("C and epochs must be positive");

    std::vector<int> classes(labels);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.size() < 2) throw InvalidParameter("training set contains a single class");

    LinearSvmModel model;
    model.classes = classes;
    model.W.setZero(classes.size(), x.cols());
    model.b.setZero(classes.size());
    model.averaged_objective.resize(classes.size());
    (void)seed;  // deterministic full-batch updates, kept for interface stability

    const double lambda = 1.0 / (C * n);
    for (size_t c = 0; c < classes.size(); ++c) {
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) y[i] = labels[i] == classes[c] ? 1.0 : -1.0;

        Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
        double b = 0.0;
        Eigen::VectorXd w_avg = w;
        double b_avg = 0.0;
        for (int t = 1; t <= epochs; ++t) {
            Eigen::VectorXd f = x * w + Eigen::VectorXd::Constant(n, b);
            Eigen::VectorXd grad_w = lambda * w;
            double grad_b = 0.0;
            for (int i = 0; i < n; ++i) {
                if (y[i] * f[i] < 1.0) {
                    grad_w -= y[i] / n * x.row(i).transpose();
                    grad_b -= y[i] / n;
                }
            }
            double eta = 1.0 / (lambda * t);
            w -= eta * grad_w;
            b -= eta * grad_b;
            w_avg += (w - w_avg) / t;
            b_avg += (b - b_avg) / t;
            model.averaged_objective[c].push_back(hinge_objective(w_avg, b_avg, x, y, lambda));
        }
        model.W.row(c) = w_avg.transpose();
        model.b[c] = b_avg;
    }
    return model;
}

int predict_svm(const LinearSvmModel& model, const Eigen::VectorXd& query) {
    if (query.size() != model.W.cols()) throw DimensionMismatch("query width mismatch");
    Eigen::VectorXd scores = model.W * query + model.b;
    int arg = 0;
    scores.maxCoeff(&arg);
    return model.classes[arg];
}

Eigen::VectorXi predict_svm_batch(const LinearSvmModel& model, const Eigen::MatrixXd& queries) {
    Eigen::VectorXi out(queries.rows());
    for (int i = 0; i < queries.rows(); ++i) out[i] = predict_svm(model, queries.row(i).transpose());
    return out;
}

std::string svm_to_json(const LinearSvmModel& model) {
    nlohmann::json j;
    j["classes"] = model.classes;
    j["bias"] = std::vector<double>(model.b.begin(), model.b.end());
    auto& rows = j["weights"] = nlohmann::json::array();
    for (int i = 0; i < model.W.rows(); ++i)
        rows.push_back(std::vector<double>(model.W.row(i).begin(), model.W.row(i).end()));
    return j.dump();
}

LinearSvmModel svm_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    LinearSvmModel model;
    model.classes = j.at("classes").get<std::vector<int>>();
    auto bias = j.at("bias").get<std::vector<double>>();
    model.b = Eigen::Map<Eigen::VectorXd>(bias.data(), bias.size());
    const auto& rows = j.at("weights");
    if (rows.empty()) throw InvalidParameter("weights missing");
    model.W.resize(rows.size(), rows[0].get<std::vector<double>>().size());
    for (size_t i = 0; i < rows.size(); ++i) {
        auto row = rows[i].get<std::vector<double>>();
        model.W.row(i) = Eigen::Map<Eigen::VectorXd>(row.data(), row.size()).transpose();
    }
    return model;
}

// ---------------------------------------------------------------------------
// Gaussian process regression
// ---------------------------------------------------------------------------

namespace {

double sq_exp(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double ell, double s2) {
    return s2 * std::exp(-(a - b).squaredNorm() / (2.0 * ell * ell));
}

}  // namespace

GprModel train_gpr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GprConfig& config) {
    const int n = static_cast<int>(x.rows());
    if (n < 1 || y.size() != n) throw DimensionMismatch("inputs and targets disagree");

    GprModel model;
    model.train_x = x;
    model.y_mean = y.mean();
    double var = n > 1 ? (y.array() - model.y_mean).square().sum() / (n - 1) : 0.0;

    if (config.length_scale) {
        model.length_scale = *config.length_scale;
    } else {
        std::vector<double> dists;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                dists.push_back((x.row(i) - x.row(j)).norm());
        if (dists.empty()) {
            model.length_scale = 1.0;
        } else {
            std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
            model.length_scale = dists[dists.size() / 2];
            if (model.length_scale <= 0.0) model.length_scale = 1.0;
        }
    }
    model.signal_var = config.signal_var ? *config.signal_var : (var > 0.0 ? var : 1.0);
    model.noise_var = config.noise_var ? *config.noise_var : 1e-2 * model.signal_var;
    if (model.length_scale <= 0.0 || model.signal_var <= 0.0 || model.noise_var <= 0.0)
        throw InvalidParameter("GPR hyperparameters must be positive");

    Eigen::MatrixXd k(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j)
            k(i, j) = k(j, i) = sq_exp(x.row(i).transpose(), x.row(j).transpose(), model.length_scale,
                                       model.signal_var);

    Eigen::VectorXd centered = y.array() - model.y_mean;
    double jitter = 0.0;
    while (true) {
        Eigen::MatrixXd reg = k;
        reg.diagonal().array() += model.noise_var + jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(reg);
        if (llt.info() == Eigen::Success) {
            model.chol_l = llt.matrixL();
            model.alpha = llt.solve(centered);
            return model;
        }
        jitter = jitter == 0.0 ? 1e-10 * model.signal_var : 10.0 * jitter;
        if (jitter > 1e-4 * model.signal_var)
            throw SolverError("kernel matrix not positive definite after jitter escalation");
    }
}

std::pair<double, double> predict_gpr(const GprModel& model, const Eigen::VectorXd& query) {
    if (query.size() != model.train_x.cols()) throw DimensionMismatch("query width mismatch");
    const int n = static_cast<int>(model.train_x.rows());
    Eigen::VectorXd ks(n);
    for (int i = 0; i < n; ++i)
        ks[i] = sq_exp(model.train_x.row(i).transpose(), query, model.length_scale, model.signal_var);
    double mean = model.y_mean + ks.dot(model.alpha);
    Eigen::VectorXd v = model.chol_l.triangularView<Eigen::Lower>().solve(ks);
    double variance = std::max(0.0, model.signal_var - v.squaredNorm());
    return {mean, variance};
}

std::string gpr_to_json(const GprModel& model) {
    nlohmann::json j;
    j["length_scale"] = model.length_scale;
    j["signal_var"] = model.signal_var;
    j["noise_var"] = model.noise_var;
    j["y_mean"] = model.y_mean;
    j["alpha"] = std::vector<double>(model.alpha.begin(), model.alpha.end());
    auto& rows = j["train_x"] = nlohmann::json::array();
    for (int i = 0; i < model.train_x.rows(); ++i)
        rows.push_back(std::vector<double>(model.train_x.row(i).begin(), model.train_x.row(i).end()));
    auto& chol = j["chol_l"] = nlohmann::json::array();
    for (int i = 0; i < model.chol_l.rows(); ++i)
        chol.push_back(std::vector<double>(model.chol_l.row(i).begin(), model.chol_l.row(i).end()));
    return j.dump();
}

GprModel gpr_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    GprModel model;
    model.length_scale = j.at("length_scale");
    model.signal_var = j.at("signal_var");
    model.noise_var = j.at("noise_var");
    model.y_mean = j.at("y_mean");
    auto alpha = j.at("alpha").get<std::vector<double>>();
    model.alpha = Eigen::Map<Eigen::VectorXd>(alpha.data(), alpha.size());
    auto read_matrix = [](const nlohmann::json& rows) {
        Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
        for (size_t i = 0; i < rows.size(); ++i) {
            auto row = rows[i].get<std::vector<double>>();
            m.row(i) = Eigen::Map<Eigen::VectorXd>(row.data(), row.size()).transpose();
        }
        return m;
    };
    model.train_x = read_matrix(j.at("train_x"));
    model.chol_l = read_matrix(j.at("chol_l"));
    return model;
}

// ---------------------------------------------------------------------------
// angle codec
// ---------------------------------------------------------------------------

Eigen::Vector2d encode_angle(double deg) {
    double rad = deg * std::numbers::pi / 180.0;
    return {std::sin(rad), std::cos(rad)};
}

double decode_angle(double sin_part, double cos_part) {
    if (sin_part * sin_part + cos_part * cos_part < 1e-24)
        throw UndefinedAngle("cannot decode the zero vector to an angle");
    double deg = std::atan2(sin_part, cos_part) * 180.0 / std::numbers::pi;
    if (deg < 0.0) deg += 360.0;
    return deg;
}

double circular_error(double a_deg, double b_deg) {
    double d = std::fmod(std::fabs(a_deg - b_deg), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

}  // namespace eitsim
