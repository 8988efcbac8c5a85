#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eitsim/fem.hpp"
#include "eitsim/mesh.hpp"

namespace eitsim {

enum class ScenarioKind { LOC, CRACK, HEALTH };

enum class Condition { Healthy, VerticalCrack, HorizontalCrack, Loose };

std::string to_string(ScenarioKind k);
std::string to_string(Condition c);
ScenarioKind scenario_kind_from_string(const std::string& s);
Condition condition_from_string(const std::string& s);

struct Scenario {
    ScenarioKind kind = ScenarioKind::LOC;
    double r = 0.0;          // specimen center radius, m
    double theta_deg = 0.0;  // specimen center angle
    double crack_angle_deg = 0.0;
    Condition condition = Condition::Healthy;
    double load_N = 0.0;
    int specimen_id = 0;
};

struct MaterialParams {
    double sigma_water = 2e-4;     // S/m
    double sigma_specimen = 1e-3;  // S/m, weakly conductive composite (5x tank water)
    double alpha_healthy = 0.40;
    double alpha_loose = 0.25;
    double alpha_vcrack = 0.05;
    double alpha_hcrack = 0.02;
    double horizontal_derating = 0.5;
    double gap_width = 1e-3;   // m
    double slit_width = 1e-3;  // m
    double specimen_radius = 0.02;
    double male_radius = 0.012;  // inner-core interface radius, for the loose gap
    double max_load = 2200.0;    // N, load-response normalization

    double load_gain(Condition c) const;
};

struct NoiseModel {
    double per_reading_sd = 1e-3;  // fraction of baseline frame RMS
    int readings_per_measurement = 100;
    double specimen_sigma_jitter = 0.01;  // lognormal sd fraction
    double position_jitter = 2e-4;        // m
    double angle_jitter = 0.5;            // deg
    std::uint64_t seed = 0;

    static NoiseModel none(std::uint64_t seed = 0) {
        return NoiseModel{0.0, 1, 0.0, 0.0, 0.0, seed};
    }
};

enum class Split { Train, Validation, Test };
enum class SplitMode { SpecimenHoldout, Random };

std::string to_string(Split s);
std::string to_string(SplitMode m);
Split split_from_string(const std::string& s);
SplitMode split_mode_from_string(const std::string& s);

struct FrameMeta {
    ScenarioKind scenario;
    int specimen_id = 0;
    double r_cm = 0.0;
    double theta_deg = 0.0;
    double crack_deg = 0.0;
    std::optional<Condition> condition;
    double load_N = 0.0;
    Split split = Split::Train;
};

// Rows of X are difference frames (measured minus homogeneous baseline).
struct LabeledDataset {
    Eigen::MatrixXd X;
    std::vector<FrameMeta> meta;
    Eigen::VectorXd baseline;

    int rows() const { return static_cast<int>(X.rows()); }
    std::vector<int> split_rows(Split s) const;
};

struct DatasetConfig {
    double tank_radius = 0.075;
    int refinement_level = 3;
    double electrode_coverage = 0.5;
    double current_amplitude = 1e-3;
    double contact_impedance = 1e-3;
    MaterialParams materials;
    NoiseModel noise;
    int specimens = 4;         // LOC and CRACK
    int health_specimens = 3;  // per condition
    double fixed_load = 1000.0;
    double load_min = 300.0;
    double load_max = 2200.0;
    int load_steps = 20;
    SplitMode split_mode = SplitMode::SpecimenHoldout;
    std::uint64_t seed = 1;
    int jobs = 1;
};

ConductivityField render_field(const Mesh& mesh, const Scenario& scenario, const MaterialParams& params);

// Element set carrying the crack in vertical-crack fields; geometric slit
// width snapped up to the local element size where the mesh is coarser.
std::vector<int> crack_elements(const Mesh& mesh, const Vec2& center, double angle_deg, double length,
                                double width);

// Fraction of an element's area covered by the annulus, by uniform triangle
// subdivision (4^depth congruent sub-triangles). Used to render sub-element
// water gaps as partial-volume conductivity mixes.
double element_overlap(const Mesh& mesh, int element, const Annulus& region, int depth = 5);

MeasurementFrame simulate_frame(const Mesh& mesh, const Scenario& scenario, const MaterialParams& params,
                                const NoiseModel& noise, const DriveProtocol& protocol,
                                double contact_impedance, std::uint64_t frame_id = 0);

LabeledDataset generate_dataset(ScenarioKind experiment, const DatasetConfig& config);

// CSV round trip, one row per frame plus a single-row baseline file.
void write_dataset_csv(const LabeledDataset& ds, const std::string& frames_path,
                       const std::string& baseline_path);
LabeledDataset read_dataset_csv(const std::string& frames_path, const std::string& baseline_path);

}  // namespace eitsim
