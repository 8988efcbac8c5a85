#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "eitsim/experiments.hpp"
#include "eitsim/learners.hpp"
#include "eitsim/pca.hpp"
#include "eitsim/phantom.hpp"
#include "eitsim/recon.hpp"

namespace py = pybind11;
using namespace eitsim;

namespace {

MlpTask task_from_string(const std::string& s) {
    if (s == "classification") return MlpTask::Classification;
    if (s == "regression") return MlpTask::Regression;
    throw InvalidParameter("unknown task: " + s + " (expected classification or regression)");
}

py::dict report_to_dict(const ExperimentReport& r) {
    py::dict out;
    out["experiment"] = r.experiment;
    out["metrics"] = r.metrics;
    out["pca_explained_ratio"] = r.pca_explained_ratio;
    out["artifacts"] = r.artifacts;
    py::list confusions;
    for (const ConfusionMatrix& cm : r.confusions) {
        py::dict d;
        d["task"] = cm.task;
        d["split"] = to_string(cm.split);
        d["classes"] = cm.classes;
        d["counts"] = cm.counts;
        confusions.append(d);
    }
    out["confusions"] = confusions;
    return out;
}

}  // namespace

PYBIND11_MODULE(_eitsim, m) {
    m.doc() = "EIT tank simulation, reconstruction, and learning toolkit";

    py::register_exception<InvalidParameter>(m, "InvalidParameter", PyExc_ValueError);
    py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);
    py::register_exception<DegenerateData>(m, "DegenerateData", PyExc_ValueError);
    py::register_exception<UndefinedAngle>(m, "UndefinedAngle", PyExc_ValueError);
    py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

    py::class_<Mesh>(m, "Mesh")
        .def_property_readonly("num_nodes", &Mesh::num_nodes)
        .def_property_readonly("num_elements", &Mesh::num_elements)
        .def_readonly("tank_radius", &Mesh::tank_radius)
        .def_readonly("refinement_level", &Mesh::refinement_level)
        .def("total_area", &Mesh::total_area)
        .def_property_readonly("nodes",
                               [](const Mesh& mesh) {
                                   Eigen::MatrixXd out(mesh.num_nodes(), 2);
                                   for (int i = 0; i < mesh.num_nodes(); ++i)
                                       out.row(i) = mesh.nodes[i].transpose();
                                   return out;
                               })
        .def_property_readonly("elements",
                               [](const Mesh& mesh) {
                                   Eigen::MatrixXi out(mesh.num_elements(), 3);
                                   for (int i = 0; i < mesh.num_elements(); ++i)
                                       for (int j = 0; j < 3; ++j) out(i, j) = mesh.elements[i][j];
                                   return out;
                               })
        .def("to_json", &mesh_to_json);

    m.def("build_mesh", &build_mesh, py::arg("tank_radius") = 0.075, py::arg("refinement_level") = 3,
          py::arg("electrode_coverage") = 0.5);

    m.def(
        "measure",
        [](const Mesh& mesh, const Eigen::VectorXd& sigma, double contact_impedance, double current) {
            return measure(mesh, ConductivityField{sigma}, DriveProtocol::adjacent(current),
                           contact_impedance)
                .v;
        },
        py::arg("mesh"), py::arg("sigma"), py::arg("contact_impedance") = 1e-3,
        py::arg("current") = 1e-3, "Boundary voltages for one conductivity field, 208 channels");

    m.def(
        "jacobian",
        [](const Mesh& mesh, const Eigen::VectorXd& sigma, double contact_impedance, double current) {
            return jacobian(mesh, ConductivityField{sigma}, DriveProtocol::adjacent(current),
                            contact_impedance);
        },
        py::arg("mesh"), py::arg("sigma"), py::arg("contact_impedance") = 1e-3,
        py::arg("current") = 1e-3);

    m.def(
        "generate_dataset",
        [](const std::string& scenario, double noise_sd, std::uint64_t seed, int jobs,
           const std::string& split_mode) {
            DatasetConfig cfg;
            cfg.noise.per_reading_sd = noise_sd;
            cfg.seed = seed;
            cfg.noise.seed = seed;
            cfg.jobs = jobs;
            cfg.split_mode = split_mode_from_string(split_mode);
            LabeledDataset ds = generate_dataset(scenario_kind_from_string(scenario), cfg);
            py::dict out;
            out["X"] = ds.X;
            out["baseline"] = ds.baseline;
            py::list split, r_cm, theta_deg, crack_deg, condition, load_n, specimen;
            for (const FrameMeta& fm : ds.meta) {
                split.append(to_string(fm.split));
                r_cm.append(fm.r_cm);
                theta_deg.append(fm.theta_deg);
                crack_deg.append(fm.crack_deg);
                condition.append(fm.condition ? py::object(py::str(to_string(*fm.condition)))
                                              : py::object(py::none()));
                load_n.append(fm.load_N);
                specimen.append(fm.specimen_id);
            }
            out["split"] = split;
            out["r_cm"] = r_cm;
            out["theta_deg"] = theta_deg;
            out["crack_deg"] = crack_deg;
            out["condition"] = condition;
            out["load_N"] = load_n;
            out["specimen_id"] = specimen;
            return out;
        },
        py::arg("scenario"), py::arg("noise_sd") = 1e-3, py::arg("seed") = 1, py::arg("jobs") = 1,
        py::arg("split_mode") = "specimen-holdout",
        "Simulate a labeled difference-frame dataset for scenario loc, crack, or health");

    py::class_<PcaModel>(m, "PcaModel")
        .def_readonly("mean", &PcaModel::mean)
        .def_readonly("components", &PcaModel::components)
        .def_readonly("explained_variance", &PcaModel::explained_variance)
        .def_readonly("explained_ratio", &PcaModel::explained_ratio)
        .def_property_readonly("k", &PcaModel::k)
        .def("to_json", &pca_to_json);

    m.def(
        "fit_pca",
        [](const Eigen::MatrixXd& x, int k, double tau) {
            if (tau > 0.0) return fit_pca(x, VarianceThreshold{tau});
            return fit_pca(x, FixedComponents{k});
        },
        py::arg("x"), py::arg("k") = 4, py::arg("tau") = 0.0);
    m.def("project", &project, py::arg("model"), py::arg("x"));
    m.def("pca_from_json", &pca_from_json);

    py::class_<MlpModel>(m, "MlpModel")
        .def_readonly("W1", &MlpModel::W1)
        .def_readonly("b1", &MlpModel::b1)
        .def_readonly("W2", &MlpModel::W2)
        .def_readonly("b2", &MlpModel::b2)
        .def_property_readonly("hidden", &MlpModel::hidden)
        .def("to_json", &mlp_to_json);

    m.def(
        "train_mlp",
        [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int hidden, const std::string& task,
           std::uint64_t seed, const Eigen::MatrixXd& x_val, const Eigen::MatrixXd& y_val) {
            MlpTrainConfig cfg;
            cfg.hidden_size = hidden;
            cfg.task = task_from_string(task);
            cfg.seed = seed;
            auto [model, report] = train_mlp(x, y, x_val, y_val, cfg);
            py::dict rep;
            rep["train_loss"] = report.train_loss;
            rep["val_loss"] = report.val_loss;
            rep["stop"] = to_string(report.stop);
            rep["iterations"] = report.iterations;
            return py::make_tuple(model, rep);
        },
        py::arg("x"), py::arg("y"), py::arg("hidden") = 5, py::arg("task") = "regression",
        py::arg("seed") = 1, py::arg("x_val") = Eigen::MatrixXd(),
        py::arg("y_val") = Eigen::MatrixXd());
    m.def("predict_mlp", &predict_mlp, py::arg("model"), py::arg("x"));
    m.def("predict_labels", &predict_labels, py::arg("model"), py::arg("x"));
    m.def("mlp_from_json", &mlp_from_json);
    m.def("one_hot", &one_hot, py::arg("labels"), py::arg("num_classes"));

    m.def("knn", &knn, py::arg("train_x"), py::arg("train_labels"), py::arg("k"), py::arg("query"));
    m.def("knn_batch", &knn_batch, py::arg("train_x"), py::arg("train_labels"), py::arg("k"),
          py::arg("queries"));

    py::class_<LinearSvmModel>(m, "LinearSvmModel")
        .def_readonly("W", &LinearSvmModel::W)
        .def_readonly("b", &LinearSvmModel::b)
        .def_readonly("classes", &LinearSvmModel::classes)
        .def("to_json", &svm_to_json);
    m.def("train_linear_svm", &train_linear_svm, py::arg("x"), py::arg("labels"), py::arg("C") = 1.0,
          py::arg("epochs") = 1000, py::arg("seed") = 1);
    m.def("predict_svm_batch", &predict_svm_batch, py::arg("model"), py::arg("queries"));

    py::class_<GprModel>(m, "GprModel")
        .def_readonly("length_scale", &GprModel::length_scale)
        .def_readonly("signal_var", &GprModel::signal_var)
        .def_readonly("noise_var", &GprModel::noise_var)
        .def("to_json", &gpr_to_json);
    m.def(
        "train_gpr",
        [](const Eigen::MatrixXd& x, const Eigen::VectorXd& y) { return train_gpr(x, y); },
        py::arg("x"), py::arg("y"));
    m.def("predict_gpr", &predict_gpr, py::arg("model"), py::arg("query"),
          "Returns (mean, variance) at the query point");

    m.def("encode_angle", &encode_angle, py::arg("deg"));
    m.def("decode_angle", &decode_angle, py::arg("sin_part"), py::arg("cos_part"));
    m.def("circular_error", &circular_error, py::arg("a_deg"), py::arg("b_deg"));

    py::class_<Reconstructor>(m, "Reconstructor")
        .def(py::init([](const Mesh& mesh, double sigma_ref, double lam, const std::string& prior,
                         double contact_impedance, double current) {
                 ReconConfig cfg{lam, prior == "identity" ? ReconPrior::Identity
                                                          : ReconPrior::SensitivityWeighted};
                 ConductivityField ref{Eigen::VectorXd::Constant(mesh.num_elements(), sigma_ref)};
                 return Reconstructor(mesh, DriveProtocol::adjacent(current), cfg, ref,
                                      contact_impedance);
             }),
             py::arg("mesh"), py::arg("sigma_ref") = 2e-4, py::arg("lam") = 0.05,
             py::arg("prior") = "sensitivity", py::arg("contact_impedance") = 1e-3,
             py::arg("current") = 1e-3, py::keep_alive<1, 2>())
        .def("reconstruct", &Reconstructor::reconstruct, py::arg("delta_v"));
    m.def("render_heatmap", &render_heatmap, py::arg("mesh"), py::arg("delta_sigma"));
    m.def(
        "blob_centroid",
        [](const Mesh& mesh, const Eigen::VectorXd& delta) {
            Vec2 c = blob_centroid(mesh, delta);
            return py::make_tuple(c.x(), c.y());
        },
        py::arg("mesh"), py::arg("delta_sigma"));

    m.def(
        "run_experiment",
        [](const std::string& which, const std::string& out_dir, int jobs, std::uint64_t seed,
           std::uint64_t train_seed, double noise_sd) {
            ExperimentConfig cfg;
            cfg.dataset.jobs = jobs;
            cfg.dataset.seed = seed;
            cfg.dataset.noise.seed = seed;
            cfg.dataset.noise.per_reading_sd = noise_sd;
            cfg.train_seed = train_seed;
            cfg.out_dir = out_dir;
            ExperimentReport r = which == "loc"     ? run_location(cfg)
                                 : which == "crack" ? run_crack(cfg)
                                 : which == "health"
                                     ? run_health(cfg)
                                     : throw InvalidParameter("unknown experiment: " + which);
            return report_to_dict(r);
        },
        py::arg("which"), py::arg("out_dir") = "", py::arg("jobs") = 1, py::arg("seed") = 1,
        py::arg("train_seed") = 6, py::arg("noise_sd") = 1e-3,
        "Run one full experiment (loc, crack, health) and return its metrics");
}
