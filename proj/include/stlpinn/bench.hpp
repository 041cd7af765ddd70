#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "stlpinn/equations.hpp"
#include "stlpinn/mhpinn.hpp"
#include "stlpinn/refsolvers.hpp"
#include "stlpinn/transfer.hpp"

namespace stlpinn {

enum class Method { STL, Vanilla, RK45, Radau, LWRadau };

std::string_view method_name(Method m) noexcept;
/// Throws InvalidConfig.
Method parse_method(std::string_view name);

struct ErrorMetrics {
    double l2_rel = 0.0;
    double l1_rel = 0.0;
    double linf_rel = 0.0;
    double mae = 0.0;
};

/// u and y are n x N (components by points). l2_rel sums the per-point Euclidean norms;
/// l1_rel and linf_rel are entrywise. Throws DimensionMismatch, ZeroReference.
ErrorMetrics relative_errors(const Eigen::MatrixXd& u, const Eigen::MatrixXd& y);

struct MetricsRow {
    std::string family;
    double alpha = 0.0;
    std::string method;
    double l2_rel = 0.0;
    double l1_rel = 0.0;
    double linf_rel = 0.0;
    double mae = 0.0;
    double wall_clock_s = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;

    friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

inline constexpr std::string_view kMetricsHeader =
    "family,alpha,method,l2_rel,l1_rel,linf_rel,mae,wall_clock_s,seed,config_hash";

/// Sort key: family, method, alpha, seed.
void sort_rows(std::vector<MetricsRow>& rows);

struct TimingStats {
    double mean = 0.0;
    double min = 0.0;
    std::size_t repeats = 0;
};

/// One untimed warm-up call, then `repeats` timed calls on the steady clock.
TimingStats time_op(const std::function<void()>& op, std::size_t repeats = 100);

/// Pool size: STL_THREADS when set to a positive integer, else the hardware concurrency.
std::size_t worker_count();

/// Runs body(0..count-1) on up to worker_count() threads. The first exception is rethrown
/// after all workers stop.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

/// Built-in head schedules. Scalability models come in increasing alpha_max.
std::vector<HeadConfig> performance_heads(Family family, const FamilyParams& base = {});
std::vector<HeadConfig> reparametrization_heads(Family family, const FamilyParams& base = {});
std::vector<std::vector<HeadConfig>> scalability_models(Family family, const FamilyParams& base = {});

/// Full-scale training defaults per family (AR also raises omega1).
LossConfig default_loss(Family family);
TrainConfig default_train(Family family);

struct ReparametrizationConfig {
    double alpha = 150.0;
    std::size_t samples = 1000;
    std::uint64_t seed = 0;
};

struct ExperimentConfig {
    Family family = Family::OHO;
    FamilyParams params;
    std::vector<HeadConfig> heads;                 // checkpoint training schedule
    std::vector<std::vector<HeadConfig>> models;   // scalability schedules
    LossConfig loss;
    TrainConfig train;
    TransferOptions transfer;
    std::size_t p = 0;                             // cascade order for polynomial targets
    std::vector<double> alphas;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::vector<Method> methods{Method::STL, Method::RK45, Method::Radau};
    bool with_vanilla = false;
    std::size_t eval_points = 1001;                // ODE evaluation grid on [0, T]
    std::size_t ar_eval_times = 51;
    std::size_t ar_cells = 200;
    double reference_rtol = 1e-10;                 // Radau reference; also its atol
    double solver_rtol = 1e-8;                     // rk45 / radau rows; also their atol
    std::size_t timing_repeats = 100;
    ReparametrizationConfig repar;
    std::vector<std::string> checkpoints;          // one per seed, or one shared by all
    std::string out_dir;
};

/// Unknown keys anywhere in the document are rejected with InvalidConfig.
ExperimentConfig parse_config(const nlohmann::json& j);
/// Throws IoError, InvalidConfig.
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& cfg);
/// FNV-1a of the canonical JSON form, 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

nlohmann::json to_json(const FamilyParams& p);
/// Keys present in j override base.
FamilyParams family_params_from_json(const nlohmann::json& j, FamilyParams base = {});

/// Evaluation grid for a family: the ODE time grid, or (t_i, x_j) at cell centres with
/// column i * cells + j for AR.
struct EvalGrid {
    std::vector<double> times;
    std::vector<double> space;
    Eigen::MatrixXd points;
};

EvalGrid evaluation_grid(const ProblemSpec& spec, const ExperimentConfig& cfg);

/// Radau (ODE) or LW-Radau (AR) solution at the grid, n x N.
Eigen::MatrixXd reference_solution(const ProblemSpec& spec, const EvalGrid& grid,
                                   const ExperimentConfig& cfg, double rtol);

/// Target instance for transfers: the family at alpha with the config's base parameters.
ProblemSpec target_problem(const ExperimentConfig& cfg, double alpha);

/// Loads the configured checkpoint for a seed or trains one from the schedule.
Checkpoint checkpoint_for_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                               const std::vector<HeadConfig>& heads);

std::vector<MetricsRow> run_performance(const ExperimentConfig& cfg);

struct ScalabilityRow {
    double alpha_max = 0.0;
    MetricsRow metrics;
};

std::vector<ScalabilityRow> run_scalability(const ExperimentConfig& cfg);

struct ReparametrizationSummary {
    std::size_t samples = 0;
    double mean_solve_s = 0.0;
    double min_solve_s = 0.0;
    double full_transfer_s = 0.0;  // mean time_op of operator assembly + solve
    double mean_mae = 0.0;
    double mean_l2_rel = 0.0;
};

struct ReparametrizationResult {
    std::vector<MetricsRow> rows;  // one per sample; seed holds the sample index
    ReparametrizationSummary summary;
};

ReparametrizationResult run_reparametrization(const ExperimentConfig& cfg);

/// Checkpoint persistence. Throws IoError, SchemaVersionMismatch, CorruptFloatArray.
nlohmann::json checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

enum class OutputFormat { Csv, Svg };

/// CSV in MetricsRow column order, or an SVG log-scale error-vs-alpha plot with one polyline
/// per method (seed-averaged l2_rel). Throws IoError; InvalidConfig for an empty SVG.
void emit_results(const std::vector<MetricsRow>& rows, const std::string& path, OutputFormat format);
std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);
std::string metrics_svg(const std::vector<MetricsRow>& rows);

/// Solution values on a grid: columns t[,x],y1..yn, one line per grid point.
std::string solution_csv(const EvalGrid& grid, const Eigen::MatrixXd& values);

void emit_scalability(const std::vector<ScalabilityRow>& rows, const std::string& path);
void emit_reparametrization_summary(const ReparametrizationSummary& s, std::string_view family,
                                    double alpha, const std::string& path);

}  // namespace stlpinn
