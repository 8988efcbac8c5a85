#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "eitsim/learners.hpp"

using namespace eitsim;

namespace {

Eigen::MatrixXd empty_m() { return Eigen::MatrixXd(0, 0); }

}  // namespace

TEST_CASE("zero network predicts the output bias everywhere") {
    MlpModel m;
    m.W1 = Eigen::MatrixXd::Zero(5, 3);
    m.b1 = Eigen::VectorXd::Zero(5);
    m.W2 = Eigen::MatrixXd::Zero(2, 5);
    m.b2.resize(2);
    m.b2 << 0.7, -1.3;
    Eigen::MatrixXd out = predict_mlp(m, Eigen::MatrixXd::Random(10, 3));
    for (int i = 0; i < 10; ++i) {
        CHECK(out(i, 0) == 0.7);
        CHECK(out(i, 1) == -1.3);
    }
}

TEST_CASE("residual jacobian matches central finite differences") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> unit(-0.8, 0.8);
    MlpModel m;
    m.W1 = Eigen::MatrixXd::NullaryExpr(4, 3, [&] { return unit(rng); });
    m.b1 = Eigen::VectorXd::NullaryExpr(4, [&] { return unit(rng); });
    m.W2 = Eigen::MatrixXd::NullaryExpr(2, 4, [&] { return unit(rng); });
    m.b2 = Eigen::VectorXd::NullaryExpr(2, [&] { return unit(rng); });
    Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(6, 3, [&] { return unit(rng); });
    Eigen::MatrixXd y = Eigen::MatrixXd::NullaryExpr(6, 2, [&] { return unit(rng); });

    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    mlp_residuals(m, x, y, r, jac);

    Eigen::VectorXd theta = mlp_pack(m);
    const double h = 1e-6;
    double scale = jac.cwiseAbs().maxCoeff();
    for (int p = 0; p < theta.size(); ++p) {
        MlpModel lo = m, hi = m;
        Eigen::VectorXd tl = theta, th = theta;
        tl[p] -= h;
        th[p] += h;
        mlp_unpack(lo, tl);
        mlp_unpack(hi, th);
        Eigen::VectorXd rl, rh;
        Eigen::MatrixXd unused;
        mlp_residuals(lo, x, y, rl, unused);
        mlp_residuals(hi, x, y, rh, unused);
        Eigen::VectorXd fd = (rh - rl) / (2.0 * h);
        CHECK((fd - jac.col(p)).cwiseAbs().maxCoeff() < 1e-5 * scale);
    }
}

TEST_CASE("linear target recovered to the normal-equations optimum") {
    std::mt19937 rng(5);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd x(40, 1);
    Eigen::MatrixXd y(40, 1);
    for (int i = 0; i < 40; ++i) {
        x(i, 0) = -1.0 + 2.0 * i / 39.0;
        y(i, 0) = 3.0 * x(i, 0) - 2.0 + 0.05 * gauss(rng);
    }
    // least-squares optimum over affine predictors
    Eigen::MatrixXd design(40, 2);
    design.col(0) = x.col(0);
    design.col(1).setOnes();
    Eigen::VectorXd beta = (design.transpose() * design).ldlt().solve(design.transpose() * y.col(0));
    double opt_rmse = std::sqrt((design * beta - y.col(0)).squaredNorm() / 40.0);

    MlpTrainConfig cfg;
    cfg.hidden_size = 5;
    cfg.seed = 1;
    auto [model, report] = train_mlp(x, y, empty_m(), empty_m(), cfg);
    double rmse = std::sqrt(mlp_loss(model, x, y));
    CHECK(rmse <= opt_rmse + 1e-3);

    for (size_t i = 1; i < report.train_loss.size(); ++i)
        CHECK(report.train_loss[i] < report.train_loss[i - 1]);
}

TEST_CASE("XOR 2-4-1 solves the truth table") {
    Eigen::MatrixXd pts(4, 2);
    pts << 0, 0, 0, 1, 1, 0, 1, 1;
    Eigen::MatrixXd truth(4, 1);
    truth << 0, 1, 1, 0;
    // duplicated rows satisfy the rows >= hidden + 1 precondition
    Eigen::MatrixXd x(8, 2), y(8, 1);
    x << pts, pts;
    y << truth, truth;

    MlpTrainConfig cfg;
    cfg.hidden_size = 4;
    cfg.seed = 2;
    auto [model, report] = train_mlp(x, y, empty_m(), empty_m(), cfg);
    Eigen::MatrixXd out = predict_mlp(model, pts);
    for (int i = 0; i < 4; ++i) CHECK(std::fabs(out(i, 0) - truth(i, 0)) < 0.5);
}

TEST_CASE("training is bit-deterministic given the seed") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(20, 3);
    Eigen::MatrixXd y = x.col(0) + x.col(1).cwiseProduct(x.col(2));
    MlpTrainConfig cfg;
    cfg.hidden_size = 3;
    cfg.seed = 9;
    cfg.max_iterations = 40;
    auto [a, ra] = train_mlp(x, y, empty_m(), empty_m(), cfg);
    auto [b, rb] = train_mlp(x, y, empty_m(), empty_m(), cfg);
    CHECK(mlp_pack(a) == mlp_pack(b));
    CHECK(ra.train_loss == rb.train_loss);
}

TEST_CASE("validation losses are tracked and the stop reason is recorded") {
    std::mt19937 rng(7);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd x(30, 2), y(30, 1), xv(10, 2), yv(10, 1);
    for (int i = 0; i < 30; ++i) {
        x.row(i) << gauss(rng), gauss(rng);
        y(i, 0) = std::sin(x(i, 0)) + 0.3 * gauss(rng);
    }
    for (int i = 0; i < 10; ++i) {
        xv.row(i) << gauss(rng), gauss(rng);
        yv(i, 0) = std::sin(xv(i, 0)) + 0.3 * gauss(rng);
    }
    MlpTrainConfig cfg;
    cfg.hidden_size = 5;
    cfg.seed = 4;
    auto [model, report] = train_mlp(x, y, xv, yv, cfg);
    CHECK(report.val_loss.size() == report.train_loss.size());
    CHECK(report.iterations <= cfg.max_iterations);
    if (report.stop == StopReason::EarlyStop) {
        // restored parameters achieve the best recorded validation loss
        double best = *std::min_element(report.val_loss.begin(), report.val_loss.end());
        CHECK(mlp_loss(model, xv, yv) == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("mlp json round trip") {
    MlpTrainConfig cfg;
    cfg.hidden_size = 3;
    cfg.task = MlpTask::Classification;
    cfg.max_iterations = 5;
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(12, 2);
    std::vector<int> labels;
    for (int i = 0; i < 12; ++i) labels.push_back(x(i, 0) > 0 ? 1 : 0);
    auto [model, report] = train_mlp(x, one_hot(labels, 2), empty_m(), empty_m(), cfg);
    MlpModel back = mlp_from_json(mlp_to_json(model));
    CHECK(mlp_pack(back) == mlp_pack(model));
    CHECK(back.task == MlpTask::Classification);
    CHECK(predict_labels(back, x) == predict_labels(model, x));
}

TEST_CASE("knn basics and brute-force oracle") {
    std::mt19937 rng(11);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd x(50, 2);
    std::vector<int> labels(50);
    for (int i = 0; i < 50; ++i) {
        labels[i] = i % 2;
        x.row(i) << gauss(rng) + 2.0 * labels[i], gauss(rng);
    }

    // query equal to a training point, k=1
    for (int i : {0, 7, 49}) CHECK(knn(x, labels, 1, x.row(i).transpose()) == labels[i]);

    // k = n -> global majority (50/50 here, tie resolved toward the nearest)
    Eigen::VectorXd far = Eigen::Vector2d(100.0, 0.0);
    int nearest = 0;
    double best = 1e300;
    for (int i = 0; i < 50; ++i) {
        double d = (x.row(i).transpose() - far).squaredNorm();
        if (d < best) {
            best = d;
            nearest = i;
        }
    }
    CHECK(knn(x, labels, 50, far) == labels[nearest]);

    // leave-nothing-out: k=1 training accuracy is exact
    for (int i = 0; i < 50; ++i) CHECK(knn(x, labels, 1, x.row(i).transpose()) == labels[i]);

    // brute-force all-pairs oracle on 20 queries, k=5
    for (int q = 0; q < 20; ++q) {
        Eigen::VectorXd query = Eigen::Vector2d(gauss(rng) + 1.0, gauss(rng));
        std::vector<std::pair<double, int>> d(50);
        for (int i = 0; i < 50; ++i) d[i] = {(x.row(i).transpose() - query).norm(), i};
        std::sort(d.begin(), d.end());
        int votes[2] = {0, 0};
        for (int i = 0; i < 5; ++i) ++votes[labels[d[i].second]];
        int expect;
        if (votes[0] != votes[1]) {
            expect = votes[1] > votes[0];
        } else {
            expect = labels[d[0].second];
        }
        CHECK(knn(x, labels, 5, query) == expect);
    }

    CHECK_THROWS_AS(knn(Eigen::MatrixXd(0, 2), {}, 1, Eigen::Vector2d(0, 0)), InvalidParameter);
}

TEST_CASE("svm separates a separable set and rescaling keeps train predictions") {
    std::mt19937 rng(13);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd x(40, 2);
    std::vector<int> labels(40);
    for (int i = 0; i < 40; ++i) {
        labels[i] = i % 2;
        x.row(i) << gauss(rng) + (labels[i] ? 3.0 : -3.0), gauss(rng);
    }
    LinearSvmModel model = train_linear_svm(x, labels, 1.0, 1000, 1);
    Eigen::VectorXi pred = predict_svm_batch(model, x);
    for (int i = 0; i < 40; ++i) CHECK(pred[i] == labels[i]);

    // inputs x10 with C/100 keeps the regularized objective equivalent
    LinearSvmModel scaled = train_linear_svm(10.0 * x, labels, 1.0 / 100.0, 1000, 1);
    Eigen::VectorXi pred_scaled = predict_svm_batch(scaled, 10.0 * x);
    CHECK(pred == pred_scaled);

    // Polyak-averaged objective trends down over epochs
    for (const auto& obj : model.averaged_objective) {
        REQUIRE(obj.size() == 1000);
        CHECK(obj[99] <= obj[9]);
        CHECK(obj[999] <= obj[99]);
    }

    CHECK_THROWS_AS(train_linear_svm(x, std::vector<int>(40, 1), 1.0, 10, 1), InvalidParameter);
}

TEST_CASE("svm handles more than two classes and survives json") {
    std::mt19937 rng(17);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd x(60, 2);
    std::vector<int> labels(60);
    double cx[3] = {-4.0, 0.0, 4.0};
    for (int i = 0; i < 60; ++i) {
        labels[i] = i % 3;
        x.row(i) << gauss(rng) * 0.5 + cx[labels[i]], gauss(rng) * 0.5;
    }
    LinearSvmModel model = train_linear_svm(x, labels, 1.0, 1000, 1);
    Eigen::VectorXi pred = predict_svm_batch(model, x);
    int correct = 0;
    for (int i = 0; i < 60; ++i) correct += pred[i] == labels[i];
    CHECK(correct == 60);

    LinearSvmModel back = svm_from_json(svm_to_json(model));
    CHECK(predict_svm_batch(back, x) == pred);
}

TEST_CASE("gpr closed-form checks") {
    // two points with explicit hyperparameters, oracle by direct 2x2 inversion
    Eigen::MatrixXd x(2, 1);
    x << 0.0, 1.0;
    Eigen::VectorXd y(2);
    y << 1.0, -1.0;
    GprConfig cfg;
    cfg.length_scale = 0.7;
    cfg.signal_var = 2.0;
    cfg.noise_var = 0.1;
    GprModel model = train_gpr(x, y, cfg);

    auto kfun = [&](double a, double b) { return 2.0 * std::exp(-(a - b) * (a - b) / (2.0 * 0.49)); };
    Eigen::Matrix2d K;
    K << kfun(0, 0) + 0.1, kfun(0, 1), kfun(1, 0), kfun(1, 1) + 0.1;
    Eigen::Vector2d centered(1.0, -1.0);  // mean of y is 0
    for (double q : {-0.3, 0.2, 0.5, 1.4}) {
        Eigen::Vector2d ks(kfun(q, 0), kfun(q, 1));
        double mean = ks.dot(K.inverse() * centered);
        double var = kfun(q, q) - ks.dot(K.inverse() * ks);
        auto [pm, pv] = predict_gpr(model, Eigen::VectorXd::Constant(1, q));
        CHECK(pm == doctest::Approx(mean).epsilon(1e-10));
        CHECK(pv == doctest::Approx(var).epsilon(1e-10));
    }
}

TEST_CASE("gpr default hyperparameters and posterior behavior") {
    std::mt19937 rng(19);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd x(25, 1);
    Eigen::VectorXd y(25);
    for (int i = 0; i < 25; ++i) {
        x(i, 0) = i / 5.0;
        y[i] = std::sin(x(i, 0)) + 0.05 * gauss(rng);
    }
    GprModel model = train_gpr(x, y);
    CHECK(model.noise_var == doctest::Approx(1e-2 * model.signal_var));

    // mean at a training input is pulled toward the target
    auto [mean0, var0] = predict_gpr(model, x.row(3).transpose());
    CHECK(std::fabs(mean0 - y[3]) < 0.2 * std::sqrt(model.signal_var));

    // posterior variance at an observed point is below the far-field prior
    auto [mean_far, var_far] = predict_gpr(model, Eigen::VectorXd::Constant(1, 100.0));
    CHECK(var0 < var_far);
    CHECK(var_far == doctest::Approx(model.signal_var).epsilon(1e-9));

    // zero-variance targets -> constant predictive mean
    GprModel flat = train_gpr(x, Eigen::VectorXd::Constant(25, 4.2));
    for (double q : {0.0, 1.7, 50.0}) {
        auto [m, v] = predict_gpr(flat, Eigen::VectorXd::Constant(1, q));
        CHECK(m == doctest::Approx(4.2).epsilon(1e-12));
    }

    GprModel back = gpr_from_json(gpr_to_json(model));
    auto [m1, v1] = predict_gpr(model, Eigen::VectorXd::Constant(1, 2.34));
    auto [m2, v2] = predict_gpr(back, Eigen::VectorXd::Constant(1, 2.34));
    CHECK(m1 == m2);
    CHECK(v1 == v2);
}

TEST_CASE("angle codec") {
    Eigen::Vector2d e90 = encode_angle(90.0);
    CHECK(e90[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(e90[1] == doctest::Approx(0.0).epsilon(1e-15));

    for (double th : {0.0, 33.0, 90.0, 179.9, 245.0, 359.0})
        CHECK(decode_angle(encode_angle(th)[0], encode_angle(th)[1]) == doctest::Approx(th).epsilon(1e-10));

    CHECK(circular_error(350.0, 10.0) == doctest::Approx(20.0));
    CHECK(circular_error(10.0, 350.0) == doctest::Approx(20.0));
    CHECK(circular_error(45.0, 45.0 + 720.0) == doctest::Approx(0.0));
    CHECK(circular_error(0.0, 180.0) == doctest::Approx(180.0));
    CHECK_THROWS_AS(decode_angle(0.0, 0.0), UndefinedAngle);
}

TEST_CASE("sin/cos regression beats raw-angle regression across the wrap") {
    // angles clustered around the 0/360 wrap; linear least squares on each codec
    std::mt19937 rng(23);
    std::normal_distribution<double> gauss;
    int n = 120;
    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd theta(n);
    for (int i = 0; i < n; ++i) {
        double th = std::fmod(330.0 + 60.0 * i / (n - 1.0), 360.0);
        theta[i] = th;
        Eigen::Vector2d enc = encode_angle(th);
        design.row(i) << enc[0] + 0.01 * gauss(rng), enc[1] + 0.01 * gauss(rng), 1.0;
    }
    Eigen::MatrixXd gram = design.transpose() * design;
    Eigen::VectorXd beta_raw = gram.ldlt().solve(design.transpose() * theta);
    Eigen::VectorXd ts = theta.unaryExpr([](double t) { return encode_angle(t)[0]; });
    Eigen::VectorXd tc = theta.unaryExpr([](double t) { return encode_angle(t)[1]; });
    Eigen::VectorXd beta_s = gram.ldlt().solve(design.transpose() * ts);
    Eigen::VectorXd beta_c = gram.ldlt().solve(design.transpose() * tc);

    double se_raw = 0.0, se_codec = 0.0;
    for (int i = 0; i < n; ++i) {
        double raw = design.row(i) * beta_raw;
        double err_raw = circular_error(raw, theta[i]);
        double dec = decode_angle(design.row(i) * beta_s, design.row(i) * beta_c);
        double err_codec = circular_error(dec, theta[i]);
        se_raw += err_raw * err_raw;
        se_codec += err_codec * err_codec;
    }
    CHECK(std::sqrt(se_codec / n) < std::sqrt(se_raw / n));
}
