#include "eitsim/phantom.hpp"


#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "eitsim/parallel.hpp"
#include "eitsim/rng.hpp"

namespace eitsim {

std::string to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::LOC: return "loc";
        case ScenarioKind::CRACK: return "crack";
        case ScenarioKind::HEALTH: return "health";
    }
    return "?";
}

std::string to_string(Condition c) {
    switch (c) {
        case Condition::Healthy: return "healthy";
        case Condition::VerticalCrack: return "vertical_crack";
        case Condition::HorizontalCrack: return "horizontal_crack";
        case Condition::Loose: return "loose";
    }
    return "?";
}

std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "?";
}

std::string to_string(SplitMode m) {
    return m == SplitMode::SpecimenHoldout ? "specimen-holdout" : "random";
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
    if (s == "loc") return ScenarioKind::LOC;
    if (s == "crack") return ScenarioKind::CRACK;
    if (s == "health") return ScenarioKind::HEALTH;
    throw InvalidParameter("unknown scenario kind: " + s);
}

Condition condition_from_string(const std::string& s) {
    if (s == "healthy") return Condition::Healthy;
    if (s == "vertical_crack") return Condition::VerticalCrack;
    if (s == "horizontal_crack") return Condition::HorizontalCrack;
    if (s == "loose") return Condition::Loose;
    throw InvalidParameter("unknown condition: " + s);
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "validation") return Split::Validation;
    if (s == "test") return Split::Test;
    throw InvalidParameter("unknown split: " + s);
}

SplitMode split_mode_from_string(const std::string& s) {
    if (s == "specimen-holdout") return SplitMode::SpecimenHoldout;
    if (s == "random") return SplitMode::Random;
    throw InvalidParameter("unknown split mode: " + s);
}

double MaterialParams::load_gain(Condition c) const {
    switch (c) {
        case Condition::Healthy: return alpha_healthy;
        case Condition::Loose: return alpha_loose;
        case Condition::VerticalCrack: return alpha_vcrack;
        case Condition::HorizontalCrack: return alpha_hcrack;
    }
    return 0.0;
}

std::vector<int> LabeledDataset::split_rows(Split s) const {
    std::vector<int> out;
    for (int i = 0; i < rows(); ++i)
        if (meta[i].split == s) out.push_back(i);
    return out;
}

std::vector<int> crack_elements(const Mesh& mesh, const Vec2& center, double angle_deg, double length,
                                double width) {
    // Slit selection with per-element width snapping: the geometric width is
    // honored where the mesh resolves it, otherwise snapped up to the local
    // element size so a thin crack never vanishes between centroids.
    double a = angle_deg * std::numbers::pi / 180.0;
    Vec2 u{std::cos(a), std::sin(a)};
    Vec2 n{-u.y(), u.x()};
    std::vector<int> out;
    for (int k = 0; k < mesh.num_elements(); ++k) {
        const auto& g = mesh.geometry[k];
        Vec2 d = g.centroid - center;
        double t = d.dot(u);
        double s = d.dot(n);
        double half_width = 0.5 * std::max(width, 0.7 * std::sqrt(2.0 * g.area));
        if (t >= 0.0 && t <= length && std::fabs(s) <= half_width) out.push_back(k);
    }
    return out;
}

namespace {

int count_overlap(const Vec2& a, const Vec2& b, const Vec2& c, const Annulus& region, int depth) {
    if (depth == 0) return region.contains((a + b + c) / 3.0) ? 1 : 0;
    Vec2 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
    return count_overlap(a, ab, ca, region, depth - 1) + count_overlap(ab, b, bc, region, depth - 1) +
           count_overlap(ca, bc, c, region, depth - 1) + count_overlap(ab, bc, ca, region, depth - 1);
}

}  // namespace

double element_overlap(const Mesh& mesh, int element, const Annulus& region, int depth) {
    const auto& tri = mesh.elements[element];
    // quick reject: the annulus cannot reach past the circumscribing circle
    double r = (mesh.geometry[element].centroid - region.center).norm();
    double reach = 0.0;
    for (int i = 0; i < 3; ++i)
        reach = std::max(reach, (mesh.nodes[tri[i]] - mesh.geometry[element].centroid).norm());
    if (r + reach < region.r_in || r - reach > region.r_out) return 0.0;
    int inside = count_overlap(mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]], region, depth);
    return inside / std::pow(4.0, depth);
}

ConductivityField render_field(const Mesh& mesh, const Scenario& sc, const MaterialParams& p) {
    if (sc.r < 0.0 || sc.load_N < 0.0) throw InvalidParameter("scenario requires r >= 0 and load >= 0");
    if (sc.r + p.specimen_radius > mesh.tank_radius)
        throw InvalidParameter("specimen protrudes outside the tank");

    double th = sc.theta_deg * std::numbers::pi / 180.0;
    Vec2 center{sc.r * std::cos(th), sc.r * std::sin(th)};

    ConductivityField field;
    field.sigma = Eigen::VectorXd::Constant(mesh.num_elements(), p.sigma_water);

    double value = p.sigma_specimen * (1.0 + p.load_gain(sc.condition) * sc.load_N / p.max_load);
    if (sc.condition == Condition::HorizontalCrack) value *= 1.0 - p.horizontal_derating;
    for (int k : elements_in_region(mesh, Disc{center, p.specimen_radius})) field.sigma[k] = value;

    if (sc.condition == Condition::VerticalCrack) {
        for (int k : crack_elements(mesh, center, sc.crack_angle_deg, p.specimen_radius, p.slit_width))
            field.sigma[k] = p.sigma_water;
    } else if (sc.condition == Condition::Loose) {
        // the 1 mm water gap is thinner than the default elements; blend each
        // crossed element by its area overlap so the removed conductance
        // matches the geometric gap exactly
        Annulus gap{center, p.male_radius - 0.5 * p.gap_width, p.male_radius + 0.5 * p.gap_width};
        for (int k : elements_in_region(mesh, Disc{center, p.specimen_radius})) {
            double q = element_overlap(mesh, k, gap);
            if (q > 0.0) field.sigma[k] = (1.0 - q) * value + q * p.sigma_water;
        }
    }
    return field;
}

namespace {

std::uint64_t specimen_uid(const Scenario& sc) {
    return static_cast<std::uint64_t>(sc.kind) * 10000 + static_cast<std::uint64_t>(sc.condition) * 100 +
           static_cast<std::uint64_t>(sc.specimen_id);
}

// Specimen-level imperfections, drawn once per specimen id from the seeded
// stream regardless of how many frames the specimen appears in.
struct SpecimenJitter {
    double sigma_factor = 1.0;
    Vec2 position_offset = Vec2::Zero();
    double angle_offset = 0.0;
};

SpecimenJitter draw_jitter(const Scenario& sc, const NoiseModel& noise) {
    auto rng = make_rng(noise.seed, "specimen", specimen_uid(sc));
    std::normal_distribution<double> gauss(0.0, 1.0);
    SpecimenJitter j;
    double g0 = gauss(rng), g1 = gauss(rng), g2 = gauss(rng), g3 = gauss(rng);
    j.sigma_factor = std::exp(noise.specimen_sigma_jitter * g0);
    j.position_offset = noise.position_jitter * Vec2{g1, g2};
    j.angle_offset = noise.angle_jitter * g3;
    return j;
}

Scenario jittered(const Scenario& sc, const SpecimenJitter& j) {
    Scenario out = sc;
    double th = sc.theta_deg * std::numbers::pi / 180.0;
    Vec2 center = Vec2{sc.r * std::cos(th), sc.r * std::sin(th)} + j.position_offset;
    out.r = center.norm();
    out.theta_deg = std::atan2(center.y(), center.x()) * 180.0 / std::numbers::pi;
    if (out.theta_deg < 0) out.theta_deg += 360.0;
    out.crack_angle_deg = sc.crack_angle_deg + j.angle_offset;
    return out;
}

}  // namespace

MeasurementFrame simulate_frame(const Mesh& mesh, const Scenario& sc, const MaterialParams& params,
                                const NoiseModel& noise, const DriveProtocol& protocol,
                                double contact_impedance, std::uint64_t frame_id) {
    SpecimenJitter jit = draw_jitter(sc, noise);
    MaterialParams p = params;
    p.sigma_specimen *= jit.sigma_factor;
    MeasurementFrame frame = measure(mesh, render_field(mesh, jittered(sc, jit), p), protocol,
                                     contact_impedance);

    if (noise.per_reading_sd > 0.0) {
        ConductivityField water;
        water.sigma = Eigen::VectorXd::Constant(mesh.num_elements(), params.sigma_water);
        MeasurementFrame baseline = measure(mesh, water, protocol, contact_impedance);
        double rms = std::sqrt(baseline.v.squaredNorm() / baseline.v.size());
        double sd = noise.per_reading_sd * rms / std::sqrt(static_cast<double>(noise.readings_per_measurement));
        auto rng = make_rng(noise.seed, "noise", frame_id);
        std::normal_distribution<double> gauss(0.0, sd);
        for (int i = 0; i < frame.v.size(); ++i) frame.v[i] += gauss(rng);
    }
    return frame;
}

namespace {

std::vector<Scenario> enumerate_scenarios(ScenarioKind kind, const DatasetConfig& cfg) {
    std::vector<Scenario> out;
    switch (kind) {
        case ScenarioKind::LOC:
            for (int s = 0; s < cfg.specimens; ++s) {
                out.push_back({kind, 0.0, 0.0, 0.0, Condition::Healthy, cfg.fixed_load, s});
                for (double r : {0.02, 0.04})
                    for (int a = 0; a < 12; ++a)
                        out.push_back({kind, r, 30.0 * a, 0.0, Condition::Healthy, cfg.fixed_load, s});
            }
            break;
        case ScenarioKind::CRACK:
            for (int s = 0; s < cfg.specimens; ++s)
                for (int a = 0; a < 12; ++a)
                    out.push_back({kind, 0.0, 0.0, 30.0 * a, Condition::VerticalCrack, cfg.fixed_load, s});
            break;
        case ScenarioKind::HEALTH:
            for (Condition c : {Condition::Healthy, Condition::VerticalCrack, Condition::HorizontalCrack,
                                Condition::Loose})
                for (int s = 0; s < cfg.health_specimens; ++s)
                    for (int l = 0; l < cfg.load_steps; ++l) {
                        double load = cfg.load_min +
                                      (cfg.load_max - cfg.load_min) * l / (cfg.load_steps - 1);
                        out.push_back({kind, 0.0, 0.0, 0.0, c, load, s});
                    }
            break;
    }
    return out;
}

std::string stratum_label(const FrameMeta& m) {
    switch (m.scenario) {
        case ScenarioKind::LOC: return "r" + std::to_string(static_cast<int>(std::lround(m.r_cm)));
        case ScenarioKind::CRACK: return "a" + std::to_string(static_cast<int>(std::lround(m.crack_deg)));
        case ScenarioKind::HEALTH: return to_string(*m.condition);
    }
    return "?";
}

void assign_splits(LabeledDataset& ds, const DatasetConfig& cfg, int holdout_specimen) {
    if (cfg.split_mode == SplitMode::SpecimenHoldout) {
        // last specimen is test only; remaining frames 80/20 train/validation,
        // stratified by class label pooled across the training specimens so
        // every class (even the single-row center position) reaches validation
        std::map<std::string, std::vector<int>> groups;
        for (int i = 0; i < ds.rows(); ++i) {
            if (ds.meta[i].specimen_id == holdout_specimen)
                ds.meta[i].split = Split::Test;
            else
                groups[stratum_label(ds.meta[i])].push_back(i);
        }
        std::uint64_t gid = 0;
        for (auto& [label, rows] : groups) {
            auto rng = make_rng(cfg.seed, "holdout-split", gid++);
            std::shuffle(rows.begin(), rows.end(), rng);
            int n_val = static_cast<int>(std::lround(0.2 * rows.size()));
            for (size_t i = 0; i < rows.size(); ++i)
                ds.meta[rows[i]].split = i < static_cast<size_t>(n_val) ? Split::Validation : Split::Train;
        }
    } else {
        // stratified 60/15/25
        std::map<std::string, std::vector<int>> strata;
        for (int i = 0; i < ds.rows(); ++i) strata[stratum_label(ds.meta[i])].push_back(i);
        std::uint64_t sid = 0;
        for (auto& [label, rows] : strata) {
            auto rng = make_rng(cfg.seed, "random-split", sid++);
            std::shuffle(rows.begin(), rows.end(), rng);
            int n = static_cast<int>(rows.size());
            int n_train = static_cast<int>(std::lround(0.60 * n));
            int n_val = static_cast<int>(std::lround(0.15 * n));
            for (int i = 0; i < n; ++i) {
                if (i < n_train)
                    ds.meta[rows[i]].split = Split::Train;
                else if (i < n_train + n_val)
                    ds.meta[rows[i]].split = Split::Validation;
                else
                    ds.meta[rows[i]].split = Split::Test;
            }
        }
    }
}

}  // namespace

LabeledDataset generate_dataset(ScenarioKind experiment, const DatasetConfig& cfg) {
    if (cfg.specimens < 2 || cfg.health_specimens < 2)
        throw InvalidParameter("at least two specimens required");
    if (cfg.load_steps < 2) throw InvalidParameter("load_steps must be >= 2");

    Mesh mesh = build_mesh(cfg.tank_radius, cfg.refinement_level, cfg.electrode_coverage);
    auto protocol = DriveProtocol::adjacent(cfg.current_amplitude);

    NoiseModel noise = cfg.noise;
    noise.seed = cfg.seed;

    ConductivityField water;
    water.sigma = Eigen::VectorXd::Constant(mesh.num_elements(), cfg.materials.sigma_water);
    MeasurementFrame baseline = measure(mesh, water, protocol, cfg.contact_impedance);

    auto scenarios = enumerate_scenarios(experiment, cfg);
    LabeledDataset ds;
    ds.baseline = baseline.v;
    ds.X.resize(scenarios.size(), baseline.v.size());
    ds.meta.resize(scenarios.size());

    parallel_for(static_cast<int>(scenarios.size()), cfg.jobs, [&](int i) {
        const Scenario& sc = scenarios[i];
        MeasurementFrame frame = simulate_frame(mesh, sc, cfg.materials, noise, protocol,
                                                cfg.contact_impedance, static_cast<std::uint64_t>(i));
        ds.X.row(i) = (frame.v - baseline.v).transpose();
        FrameMeta m;
        m.scenario = sc.kind;
        m.specimen_id = sc.specimen_id;
        m.r_cm = sc.r * 100.0;
        m.theta_deg = sc.theta_deg;
        m.crack_deg = sc.crack_angle_deg;
        m.condition = sc.condition;
        m.load_N = sc.load_N;
        ds.meta[i] = m;
    });

    int holdout = experiment == ScenarioKind::HEALTH ? cfg.health_specimens - 1 : cfg.specimens - 1;
    assign_splits(ds, cfg, holdout);
    return ds;
}

void write_dataset_csv(const LabeledDataset& ds, const std::string& frames_path,
                       const std::string& baseline_path) {
    std::ofstream f(frames_path);
    if (!f) throw InvalidParameter("cannot open " + frames_path);
    f.precision(17);
    f << "scenario,specimen_id,r_cm,theta_deg,crack_deg,condition,load_N,split";
    for (int c = 0; c < ds.X.cols(); ++c)
        f << ",v_" << (c < 100 ? (c < 10 ? "00" : "0") : "") << c;
    f << "\n";
    for (int i = 0; i < ds.rows(); ++i) {
        const auto& m = ds.meta[i];
        f << to_string(m.scenario) << ',' << m.specimen_id << ',' << m.r_cm << ',' << m.theta_deg << ','
          << m.crack_deg << ',' << (m.condition ? to_string(*m.condition) : "") << ',' << m.load_N << ','
          << to_string(m.split);
        for (int c = 0; c < ds.X.cols(); ++c) f << ',' << ds.X(i, c);
        f << "\n";
    }

    std::ofstream b(baseline_path);
    if (!b) throw InvalidParameter("cannot open " + baseline_path);
    b.precision(17);
    for (int c = 0; c < ds.baseline.size(); ++c)
        b << (c ? "," : "") << "v_" << (c < 100 ? (c < 10 ? "00" : "0") : "") << c;
    b << "\n";
    for (int c = 0; c < ds.baseline.size(); ++c) b << (c ? "," : "") << ds.baseline[c];
    b << "\n";
}

namespace {
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}
}  // namespace

LabeledDataset read_dataset_csv(const std::string& frames_path, const std::string& baseline_path) {
    std::ifstream f(frames_path);
    if (!f) throw InvalidParameter("cannot open " + frames_path);
    std::string line;
    if (!std::getline(f, line)) throw InvalidParameter("empty dataset file");
    auto header = split_csv_line(line);
    if (header.size() < 9 || header[0] != "scenario")
        throw InvalidParameter("unexpected dataset header");
    int n_channels = static_cast<int>(header.size()) - 8;

    LabeledDataset ds;
    std::vector<Eigen::VectorXd> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (static_cast<int>(cells.size()) != n_channels + 8)
            throw InvalidParameter("bad dataset row");
        FrameMeta m;
        m.scenario = scenario_kind_from_string(cells[0]);
        m.specimen_id = std::stoi(cells[1]);
        m.r_cm = std::stod(cells[2]);
        m.theta_deg = std::stod(cells[3]);
        m.crack_deg = std::stod(cells[4]);
        if (!cells[5].empty()) m.condition = condition_from_string(cells[5]);
        m.load_N = std::stod(cells[6]);
        m.split = split_from_string(cells[7]);
        ds.meta.push_back(m);
        Eigen::VectorXd v(n_channels);
        for (int c = 0; c < n_channels; ++c) v[c] = std::stod(cells[8 + c]);
        rows.push_back(std::move(v));
    }
    ds.X.resize(rows.size(), n_channels);
    for (size_t i = 0; i < rows.size(); ++i) ds.X.row(i) = rows[i].transpose();

    std::ifstream b(baseline_path);
    if (!b) throw InvalidParameter("cannot open " + baseline_path);
    std::getline(b, line);  // header
    if (!std::getline(b, line)) throw InvalidParameter("empty baseline file");
    auto cells = split_csv_line(line);
    ds.baseline.resize(cells.size());
    for (size_t c = 0; c < cells.size(); ++c) ds.baseline[c] = std::stod(cells[c]);
    return ds;
}

}  // namespace eitsim
