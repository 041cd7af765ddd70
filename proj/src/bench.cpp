#include "stlpinn/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "stlpinn/error.hpp"

namespace stlpinn {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---- config parsing helpers --------------------------------------------------------------

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!j.is_object()) throw Error(Errc::InvalidConfig, std::string(where) + " must be an object");
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw Error(Errc::InvalidConfig,
                        "unknown key '" + item.key() + "' in " + std::string(where));
    }
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::string sampling_name(Sampling s) { return s == Sampling::Random ? "random" : "equispaced"; }

Sampling parse_sampling(const std::string& s) {
    if (s == "random") return Sampling::Random;
    if (s == "equispaced") return Sampling::Equispaced;
    throw Error(Errc::InvalidConfig, "sampling must be 'equispaced' or 'random'");
}

json loss_to_json(const LossConfig& c) {
    return {{"omega1", c.omega1},   {"omega2", c.omega2},         {"n1", c.n1},
            {"n2", c.n2},           {"ar_nt", c.ar_nt},           {"ar_nx", c.ar_nx},
            {"ar_edge", c.ar_edge}, {"ar_ic", c.ar_ic},           {"sampling", sampling_name(c.sampling)},
            {"sampling_seed", c.sampling_seed}};
}

LossConfig loss_from_json(const json& j, LossConfig c) {
    check_keys(j, {"omega1", "omega2", "n1", "n2", "ar_nt", "ar_nx", "ar_edge", "ar_ic", "sampling",
                   "sampling_seed"},
               "loss");
    read(j, "omega1", c.omega1);
    read(j, "omega2", c.omega2);
    read(j, "n1", c.n1);
    read(j, "n2", c.n2);
    read(j, "ar_nt", c.ar_nt);
    read(j, "ar_nx", c.ar_nx);
    read(j, "ar_edge", c.ar_edge);
    read(j, "ar_ic", c.ar_ic);
    if (j.contains("sampling")) c.sampling = parse_sampling(j.at("sampling").get<std::string>());
    read(j, "sampling_seed", c.sampling_seed);
    return c;
}

json train_to_json(const TrainConfig& c) {
    return {{"widths", c.widths},       {"lr", c.lr},         {"gamma", c.gamma},
            {"step_size", c.step_size}, {"epochs", c.epochs}, {"seed", c.seed},
            {"init_gain", c.init_gain}};
}

TrainConfig train_from_json(const json& j, TrainConfig c) {
    check_keys(j, {"widths", "lr", "gamma", "step_size", "epochs", "seed", "init_gain"}, "train");
    read(j, "widths", c.widths);
    read(j, "lr", c.lr);
    read(j, "gamma", c.gamma);
    read(j, "step_size", c.step_size);
    read(j, "epochs", c.epochs);
    read(j, "seed", c.seed);
    read(j, "init_gain", c.init_gain);
    return c;
}

json transfer_to_json(const TransferOptions& o) {
    json j = {{"solver", o.solver == TransferSolver::StackedQR ? "qr" : "normal"},
              {"factor", o.kind == FactorKind::Cholesky ? "cholesky" : "lu"},
              {"ridge", o.ridge}};
    if (o.omega1) j["omega1"] = *o.omega1;
    if (o.omega2) j["omega2"] = *o.omega2;
    return j;
}

TransferOptions transfer_from_json(const json& j) {
    check_keys(j, {"solver", "factor", "ridge", "omega1", "omega2"}, "transfer");
    TransferOptions o;
    if (j.contains("solver")) {
        const auto s = j.at("solver").get<std::string>();
        if (s == "qr") o.solver = TransferSolver::StackedQR;
        else if (s == "normal") o.solver = TransferSolver::Normal;
        else throw Error(Errc::InvalidConfig, "transfer.solver must be 'normal' or 'qr'");
    }
    if (j.contains("factor")) {
        const auto s = j.at("factor").get<std::string>();
        if (s == "cholesky") o.kind = FactorKind::Cholesky;
        else if (s == "lu") o.kind = FactorKind::LU;
        else throw Error(Errc::InvalidConfig, "transfer.factor must be 'lu' or 'cholesky'");
    }
    read(j, "ridge", o.ridge);
    if (o.ridge < 0.0) throw Error(Errc::InvalidConfig, "transfer.ridge must be non-negative");
    if (j.contains("omega1")) o.omega1 = j.at("omega1").get<double>();
    if (j.contains("omega2")) o.omega2 = j.at("omega2").get<double>();
    return o;
}

json head_to_json(const HeadConfig& h) {
    return {{"family", std::string(family_name(h.family))}, {"alpha", h.alpha}, {"params", to_json(h.params)}};
}

HeadConfig head_from_json(const json& j, Family family, const FamilyParams& base) {
    check_keys(j, {"family", "alpha", "params"}, "head");
    HeadConfig h;
    h.family = j.contains("family") ? parse_family(j.at("family").get<std::string>()) : family;
    h.alpha = j.at("alpha").get<double>();
    h.params = j.contains("params") ? family_params_from_json(j.at("params"), base) : base;
    return h;
}

std::vector<HeadConfig> heads_from_json(const json& j, Family family, const FamilyParams& base) {
    if (!j.is_array()) throw Error(Errc::InvalidConfig, "heads must be an array");
    std::vector<HeadConfig> out;
    for (const auto& h : j) {
        // A bare number is shorthand for a head at that alpha with the base parameters.
        if (h.is_number()) out.push_back({family, h.get<double>(), base});
        else out.push_back(head_from_json(h, family, base));
    }
    return out;
}

std::vector<HeadConfig> alpha_heads(Family family, const FamilyParams& base,
                                    std::initializer_list<double> alphas) {
    std::vector<HeadConfig> out;
    for (double a : alphas) out.push_back({family, a, base});
    return out;
}

std::vector<HeadConfig> range_heads(Family family, const FamilyParams& base, double first,
                                    double step, int count) {
    std::vector<HeadConfig> out;
    for (int i = 0; i < count; ++i) out.push_back({family, first + step * i, base});
    return out;
}

// ---- evaluation helpers ------------------------------------------------------------------

Tolerances tolerances(double rtol) {
    Tolerances t;
    t.rtol = rtol;
    t.atol = rtol;
    return t;
}

Eigen::MatrixXd transpose_values(const DenseMatrix& v) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(v.cols()), static_cast<Eigen::Index>(v.rows()));
    for (std::size_t i = 0; i < v.rows(); ++i)
        for (std::size_t c = 0; c < v.cols(); ++c)
            out(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = v(i, c);
    return out;
}

Eigen::MatrixXd numerical_solution(const ProblemSpec& spec, const EvalGrid& grid, Method method,
                                   const ExperimentConfig& cfg, double rtol) {
    if (spec.is_ode()) {
        if (method == Method::RK45) return transpose_values(rk45_solve(spec, tolerances(rtol), grid.times).values);
        if (method == Method::Radau) return transpose_values(radau_solve(spec, tolerances(rtol), grid.times).values);
        throw Error(Errc::InvalidConfig, "lw-radau applies to the AR family only");
    }
    if (method == Method::RK45) throw Error(Errc::InvalidConfig, "rk45 applies to ODE families only");
    ArGrid g;
    g.cells = cfg.ar_cells;
    g.reaction = ReactionSubstep::Radau;
    return transpose_values(godunov_split_solve(spec, g, grid.times, tolerances(rtol)).values);
}

TransferSolution full_transfer(const Checkpoint& ck, const ProblemSpec& target, const ExperimentConfig& cfg) {
    if (target.is_linear()) return transfer_linear(ck, target, cfg.transfer);
    return transfer_nonlinear(ck, target, cfg.p, cfg.transfer);
}

MetricsRow make_row(const ExperimentConfig& cfg, double alpha, Method m, const ErrorMetrics& e,
                    double seconds, std::uint64_t seed, const std::string& hash) {
    MetricsRow r;
    r.family = std::string(family_name(cfg.family));
    r.alpha = alpha;
    r.method = std::string(method_name(m));
    r.l2_rel = e.l2_rel;
    r.l1_rel = e.l1_rel;
    r.linf_rel = e.linf_rel;
    r.mae = e.mae;
    r.wall_clock_s = seconds;
    r.seed = seed;
    r.config_hash = hash;
    return r;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw Error(Errc::IoError, "failed writing '" + path + "'");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- checkpoint arrays -------------------------------------------------------------------

json row_major(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
    return a;
}

std::vector<double> float_array(const json& j, const char* key, std::size_t expected) {
    if (!j.contains(key)) throw Error(Errc::CorruptFloatArray, std::string("missing array '") + key + "'");
    const json& a = j.at(key);
    if (!a.is_array()) throw Error(Errc::CorruptFloatArray, std::string("'") + key + "' is not an array");
    if (expected != static_cast<std::size_t>(-1) && a.size() != expected)
        throw Error(Errc::CorruptFloatArray, std::string("'") + key + "' has " + std::to_string(a.size()) +
                                                 " entries, expected " + std::to_string(expected));
    std::vector<double> out;
    out.reserve(a.size());
    for (const auto& v : a) {
        if (!v.is_number())
            throw Error(Errc::CorruptFloatArray, std::string("'") + key + "' holds a non-numeric entry");
        out.push_back(v.get<double>());
    }
    return out;
}

Eigen::MatrixXd from_row_major(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
    return m;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw Error(Errc::InvalidConfig, "bad number '" + s + "' in CSV");
    return v;
}

void check_csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") != std::string::npos)
        throw Error(Errc::InvalidConfig, "CSV field '" + s + "' contains a separator");
}

}  // namespace

// ---- methods and metrics -----------------------------------------------------------------

std::string_view method_name(Method m) noexcept {
    switch (m) {
        case Method::STL: return "stl";
        case Method::Vanilla: return "vanilla";
        case Method::RK45: return "rk45";
        case Method::Radau: return "radau";
        case Method::LWRadau: return "lw-radau";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    for (Method m : {Method::STL, Method::Vanilla, Method::RK45, Method::Radau, Method::LWRadau})
        if (method_name(m) == name) return m;
    throw Error(Errc::InvalidConfig, "unknown method '" + std::string(name) + "'");
}

ErrorMetrics relative_errors(const Eigen::MatrixXd& u, const Eigen::MatrixXd& y) {
    if (u.rows() != y.rows() || u.cols() != y.cols() || y.size() == 0)
        throw Error(Errc::DimensionMismatch, "solution grids are not congruent");
    const Eigen::MatrixXd diff = u - y;
    const double l2_den = y.colwise().norm().sum();
    const double l1_den = y.cwiseAbs().sum();
    const double inf_den = y.cwiseAbs().maxCoeff();
    if (l2_den < 1e-300 || l1_den < 1e-300 || inf_den < 1e-300)
        throw Error(Errc::ZeroReference, "reference solution is identically zero");
    ErrorMetrics e;
    e.l2_rel = diff.colwise().norm().sum() / l2_den;
    e.l1_rel = diff.cwiseAbs().sum() / l1_den;
    e.linf_rel = diff.cwiseAbs().maxCoeff() / inf_den;
    e.mae = diff.cwiseAbs().mean();
    return e;
}

void sort_rows(std::vector<MetricsRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
        return std::tie(a.family, a.method, a.alpha, a.seed) < std::tie(b.family, b.method, b.alpha, b.seed);
    });
}

TimingStats time_op(const std::function<void()>& op, std::size_t repeats) {
    op();
    TimingStats s;
    s.repeats = repeats;
    if (repeats == 0) return s;
    double total = 0.0;
    s.min = INFINITY;
    for (std::size_t i = 0; i < repeats; ++i) {
        const auto start = Clock::now();
        op();
        const double dt = seconds_since(start);
        total += dt;
        s.min = std::min(s.min, dt);
    }
    s.mean = total / static_cast<double>(repeats);
    return s;
}

std::size_t worker_count() {
    if (const char* env = std::getenv("STL_THREADS")) {
        std::size_t v = 0;
        const std::string_view s(env);
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec == std::errc() && res.ptr == s.data() + s.size() && v > 0) return v;
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min(worker_count(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count && !failed; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!first) first = std::current_exception();
                    failed = true;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

// ---- schedules ---------------------------------------------------------------------------

std::vector<HeadConfig> performance_heads(Family family, const FamilyParams& base) {
    switch (family) {
        case Family::OHO:
        case Family::NCFF: return range_heads(family, base, 2.0, 2.0, 10);
        case Family::Duffing: return range_heads(family, base, 13.0, 3.0, 10);
        case Family::AR: return alpha_heads(family, base, {3.0, 6.0, 8.0, 12.0});
    }
    return {};
}

std::vector<HeadConfig> reparametrization_heads(Family family, const FamilyParams& base) {
    std::vector<HeadConfig> out;
    switch (family) {
        case Family::OHO: {
            const double y1[] = {0.59, 1.1, 1.4, 2.9, 3.7, 4.2, 4.1, 0.30, 2.2, 1.7};
            const double y2[] = {1.5, 3.3, 3.7, 3.3, 3.1, 4.7, 0.59, 3.9, 0.86, 1.3};
            for (int i = 0; i < 10; ++i) {
                FamilyParams p = base;
                p.y0 = Vector{y1[i], y2[i]};
                out.push_back({family, 2.0 + 2.0 * i, p});
            }
            break;
        }
        case Family::NCFF: {
            const double w[] = {2.3, 0.49, 0.059, 0.12, 0.98, 3.1, 0.82, 1.1, 0.67, 2.7};
            for (int i = 0; i < 10; ++i) {
                FamilyParams p = base;
                p.omega = w[i];
                out.push_back({family, 2.0 + 2.0 * i, p});
            }
            break;
        }
        case Family::Duffing: {
            const double y1[] = {1.9, 1.4, 1.7, 0.62, 0.58, 1.1, 0.63, 0.50, 1.7, 1.4};
            const double y2[] = {0.59, 0.62, 0.19, 0.32, 0.34, 0.81, 0.51, 0.26, 0.81, 0.43};
            for (int i = 0; i < 10; ++i) {
                FamilyParams p = base;
                p.y0 = Vector{y1[i], y2[i]};
                p.beta = 0.5;
                out.push_back({family, 13.0 + 3.0 * i, p});
            }
            break;
        }
        case Family::AR: {
            const double a[] = {3.0, 6.0, 8.0, 12.0};
            const double peak[] = {0.5, 1.0, 1.5, 2.0};
            for (int i = 0; i < 4; ++i) {
                FamilyParams p = base;
                p.y0max = peak[i];
                out.push_back({family, a[i], p});
            }
            break;
        }
    }
    return out;
}

std::vector<std::vector<HeadConfig>> scalability_models(Family family, const FamilyParams& base) {
    switch (family) {
        case Family::OHO:
            return {range_heads(family, base, 1.0, 1.0, 10),
                    alpha_heads(family, base, {1, 3, 5, 7, 9, 11, 12, 13, 14, 15}),
                    range_heads(family, base, 2.0, 2.0, 10),
                    alpha_heads(family, base, {1, 5, 9, 13, 15, 17, 19, 21, 23, 25})};
        case Family::NCFF:
            return {range_heads(family, base, 1.0, 1.0, 10), range_heads(family, base, 2.0, 2.0, 10),
                    range_heads(family, base, 3.0, 3.0, 10)};
        case Family::Duffing:
            return {range_heads(family, base, 11.0, 1.0, 10), range_heads(family, base, 12.0, 2.0, 10),
                    range_heads(family, base, 13.0, 3.0, 10)};
        case Family::AR:
            return {alpha_heads(family, base, {1, 2, 3, 4}), alpha_heads(family, base, {3, 6, 9, 12})};
    }
    return {};
}

LossConfig default_loss(Family family) {
    LossConfig c;
    if (family == Family::AR) c.omega1 = 1e4;
    return c;
}

TrainConfig default_train(Family family) {
    TrainConfig c;
    switch (family) {
        case Family::OHO: break;
        case Family::NCFF:
        case Family::Duffing:
            c.lr = 5e-4;
            c.epochs = 40000;
            break;
        case Family::AR:
            c.widths = {2, 128, 128, 256, 256, 512};
            c.gamma = 0.97;
            c.epochs = 30000;
            break;
    }
    return c;
}

// ---- configuration -----------------------------------------------------------------------

json to_json(const FamilyParams& p) {
    json j = {{"omega", p.omega}, {"beta", p.beta}, {"duffing_a21", p.duffing_a21},
              {"mu", p.mu},       {"k1", p.k1},     {"k2", p.k2},
              {"y0max", p.y0max}, {"T", p.T},       {"L", p.L}};
    j["y0"] = p.y0 ? json(*p.y0) : json(nullptr);
    return j;
}

FamilyParams family_params_from_json(const json& j, FamilyParams p) {
    check_keys(j, {"y0", "omega", "beta", "duffing_a21", "mu", "k1", "k2", "y0max", "T", "L"}, "params");
    if (j.contains("y0")) {
        if (j.at("y0").is_null()) p.y0.reset();
        else p.y0 = j.at("y0").get<Vector>();
    }
    read(j, "omega", p.omega);
    read(j, "beta", p.beta);
    read(j, "duffing_a21", p.duffing_a21);
    read(j, "mu", p.mu);
    read(j, "k1", p.k1);
    read(j, "k2", p.k2);
    read(j, "y0max", p.y0max);
    read(j, "T", p.T);
    read(j, "L", p.L);
    return p;
}

ExperimentConfig parse_config(const json& j) {
    try {
        check_keys(j, {"family", "params", "schedule", "heads", "models", "loss", "train", "transfer", "p",
                       "alphas", "seeds", "methods", "with_vanilla", "eval_points", "ar_eval_times",
                       "ar_cells", "reference_rtol", "solver_rtol", "timing_repeats", "repar",
                       "checkpoints", "out_dir"},
                   "config");
        ExperimentConfig c;
        if (!j.contains("family")) throw Error(Errc::InvalidConfig, "config needs a 'family'");
        c.family = parse_family(j.at("family").get<std::string>());
        if (j.contains("params")) c.params = family_params_from_json(j.at("params"));

        const std::string schedule = j.value("schedule", std::string("performance"));
        if (j.contains("heads")) {
            c.heads = heads_from_json(j.at("heads"), c.family, c.params);
        } else if (schedule == "performance") {
            c.heads = performance_heads(c.family, c.params);
        } else if (schedule == "reparametrization") {
            c.heads = reparametrization_heads(c.family, c.params);
        } else {
            throw Error(Errc::InvalidConfig,
                        "schedule must be 'performance' or 'reparametrization' when no heads are given");
        }
        if (c.heads.empty()) throw Error(Errc::InvalidConfig, "the head schedule is empty");

        if (j.contains("models")) {
            for (const auto& m : j.at("models")) c.models.push_back(heads_from_json(m, c.family, c.params));
        } else {
            c.models = scalability_models(c.family, c.params);
        }

        c.loss = j.contains("loss") ? loss_from_json(j.at("loss"), default_loss(c.family)) : default_loss(c.family);
        c.train = j.contains("train") ? train_from_json(j.at("train"), default_train(c.family))
                                      : default_train(c.family);
        if (j.contains("transfer")) c.transfer = transfer_from_json(j.at("transfer"));
        read(j, "p", c.p);
        if (c.p > 20) throw Error(Errc::InvalidConfig, "p must lie in [0, 20]");
        read(j, "alphas", c.alphas);
        read(j, "seeds", c.seeds);
        if (c.seeds.empty()) throw Error(Errc::InvalidConfig, "at least one seed is required");
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
        }
        read(j, "with_vanilla", c.with_vanilla);
        read(j, "eval_points", c.eval_points);
        read(j, "ar_eval_times", c.ar_eval_times);
        read(j, "ar_cells", c.ar_cells);
        read(j, "reference_rtol", c.reference_rtol);
        read(j, "solver_rtol", c.solver_rtol);
        read(j, "timing_repeats", c.timing_repeats);
        if (j.contains("repar")) {
            const json& r = j.at("repar");
            check_keys(r, {"alpha", "samples", "seed"}, "repar");
            read(r, "alpha", c.repar.alpha);
            read(r, "samples", c.repar.samples);
            read(r, "seed", c.repar.seed);
        }
        read(j, "checkpoints", c.checkpoints);
        read(j, "out_dir", c.out_dir);
        if (c.eval_points < 2 || c.ar_eval_times < 2 || c.ar_cells < 2)
            throw Error(Errc::InvalidConfig, "evaluation grids need at least two points");
        return c;
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidConfig, std::string("malformed config: ") + e.what());
    }
}

ExperimentConfig load_config(const std::string& path) {
    const std::string text = read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidConfig, "'" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
    json heads = json::array();
    for (const auto& h : c.heads) heads.push_back(head_to_json(h));
    json models = json::array();
    for (const auto& m : c.models) {
        json mj = json::array();
        for (const auto& h : m) mj.push_back(head_to_json(h));
        models.push_back(mj);
    }
    json methods = json::array();
    for (Method m : c.methods) methods.push_back(std::string(method_name(m)));
    return {{"family", std::string(family_name(c.family))},
            {"params", to_json(c.params)},
            {"heads", heads},
            {"models", models},
            {"loss", loss_to_json(c.loss)},
            {"train", train_to_json(c.train)},
            {"transfer", transfer_to_json(c.transfer)},
            {"p", c.p},
            {"alphas", c.alphas},
            {"seeds", c.seeds},
            {"methods", methods},
            {"with_vanilla", c.with_vanilla},
            {"eval_points", c.eval_points},
            {"ar_eval_times", c.ar_eval_times},
            {"ar_cells", c.ar_cells},
            {"reference_rtol", c.reference_rtol},
            {"solver_rtol", c.solver_rtol},
            {"timing_repeats", c.timing_repeats},
            {"repar", {{"alpha", c.repar.alpha}, {"samples", c.repar.samples}, {"seed", c.repar.seed}}},
            {"checkpoints", c.checkpoints},
            {"out_dir", c.out_dir}};
}

std::string config_hash(const ExperimentConfig& cfg) {
    json j = to_json(cfg);
    j.erase("out_dir");  // where results go does not change what they are
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---- evaluation --------------------------------------------------------------------------

EvalGrid evaluation_grid(const ProblemSpec& spec, const ExperimentConfig& cfg) {
    EvalGrid g;
    if (spec.is_ode()) {
        g.times = linspace(0.0, spec.T, cfg.eval_points);
        g.points.resize(1, static_cast<Eigen::Index>(g.times.size()));
        for (std::size_t i = 0; i < g.times.size(); ++i) g.points(0, static_cast<Eigen::Index>(i)) = g.times[i];
        return g;
    }
    g.times = linspace(0.0, spec.T, cfg.ar_eval_times);
    g.space = ar_cell_centres(spec.L.at(0), cfg.ar_cells);
    const auto nt = static_cast<Eigen::Index>(g.times.size()), nx = static_cast<Eigen::Index>(g.space.size());
    g.points.resize(2, nt * nx);
    for (Eigen::Index i = 0; i < nt; ++i)
        for (Eigen::Index j = 0; j < nx; ++j) {
            g.points(0, i * nx + j) = g.times[static_cast<std::size_t>(i)];
            g.points(1, i * nx + j) = g.space[static_cast<std::size_t>(j)];
        }
    return g;
}

Eigen::MatrixXd reference_solution(const ProblemSpec& spec, const EvalGrid& grid,
                                   const ExperimentConfig& cfg, double rtol) {
    return numerical_solution(spec, grid, spec.is_ode() ? Method::Radau : Method::LWRadau, cfg, rtol);
}

ProblemSpec target_problem(const ExperimentConfig& cfg, double alpha) {
    return instantiate(cfg.family, alpha, cfg.params);
}

Checkpoint checkpoint_for_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                               const std::vector<HeadConfig>& heads) {
    if (!cfg.checkpoints.empty()) {
        if (cfg.checkpoints.size() == 1) return load_checkpoint(cfg.checkpoints[0]);
        const auto it = std::find(cfg.seeds.begin(), cfg.seeds.end(), seed);
        if (cfg.checkpoints.size() != cfg.seeds.size() || it == cfg.seeds.end())
            throw Error(Errc::InvalidConfig, "give one checkpoint, or one per seed");
        return load_checkpoint(cfg.checkpoints[static_cast<std::size_t>(it - cfg.seeds.begin())]);
    }
    TrainConfig t = cfg.train;
    t.seed = seed;
    return train(heads, cfg.loss, t);
}

std::vector<MetricsRow> run_performance(const ExperimentConfig& cfg) {
    const std::string hash = config_hash(cfg);
    std::set<Method> methods(cfg.methods.begin(), cfg.methods.end());
    if (cfg.with_vanilla) methods.insert(Method::Vanilla);
    if (cfg.family == Family::AR && methods.erase(Method::Radau)) methods.insert(Method::LWRadau);
    if (cfg.alphas.empty()) return {};

    const std::size_t na = cfg.alphas.size(), ns = cfg.seeds.size();
    std::vector<ProblemSpec> targets;
    std::vector<EvalGrid> grids;
    for (double a : cfg.alphas) {
        targets.push_back(target_problem(cfg, a));
        grids.push_back(evaluation_grid(targets.back(), cfg));
    }
    std::vector<Eigen::MatrixXd> refs(na);
    parallel_for(na, [&](std::size_t i) {
        refs[i] = reference_solution(targets[i], grids[i], cfg, cfg.reference_rtol);
    });

    std::vector<MetricsRow> rows;
    std::mutex mu;
    auto push = [&](MetricsRow r) {
        std::lock_guard<std::mutex> lock(mu);
        rows.push_back(std::move(r));
    };

    if (methods.count(Method::STL)) {
        std::vector<Checkpoint> cks(ns);
        parallel_for(ns, [&](std::size_t s) { cks[s] = checkpoint_for_seed(cfg, cfg.seeds[s], cfg.heads); });
        parallel_for(na * ns, [&](std::size_t k) {
            const std::size_t i = k % na, s = k / na;
            const TransferSolution sol = full_transfer(cks[s], targets[i], cfg);
            const auto e = relative_errors(sol.evaluate(grids[i].points), refs[i]);
            const auto t = time_op([&] { full_transfer(cks[s], targets[i], cfg); }, cfg.timing_repeats);
            push(make_row(cfg, cfg.alphas[i], Method::STL, e, t.mean, cfg.seeds[s], hash));
        });
    }
    if (methods.count(Method::Vanilla)) {
        if (!targets.front().is_linear())
            throw Error(Errc::Unsupported, "the vanilla baseline trains linear heads only");
        parallel_for(na * ns, [&](std::size_t k) {
            const std::size_t i = k % na, s = k / na;
            TrainConfig t = cfg.train;
            t.seed = cfg.seeds[s];
            const auto start = Clock::now();
            const Checkpoint ck = train_vanilla({cfg.family, cfg.alphas[i], cfg.params}, cfg.loss, t);
            const double secs = seconds_since(start);
            const auto e = relative_errors(head_output(ck.net, ck.head_weights[0], grids[i].points), refs[i]);
            push(make_row(cfg, cfg.alphas[i], Method::Vanilla, e, secs, cfg.seeds[s], hash));
        });
    }
    // Deterministic solvers get one row per alpha (seed 0).
    for (Method m : {Method::RK45, Method::Radau, Method::LWRadau}) {
        if (!methods.count(m)) continue;
        parallel_for(na, [&](std::size_t i) {
            const auto u = numerical_solution(targets[i], grids[i], m, cfg, cfg.solver_rtol);
            const auto e = relative_errors(u, refs[i]);
            const auto t = time_op([&] { numerical_solution(targets[i], grids[i], m, cfg, cfg.solver_rtol); },
                                   cfg.timing_repeats);
            push(make_row(cfg, cfg.alphas[i], m, e, t.mean, 0, hash));
        });
    }
    sort_rows(rows);
    return rows;
}

std::vector<ScalabilityRow> run_scalability(const ExperimentConfig& cfg) {
    const std::string hash = config_hash(cfg);
    if (cfg.alphas.empty() || cfg.models.empty()) return {};
    const std::size_t na = cfg.alphas.size(), ns = cfg.seeds.size(), nm = cfg.models.size();
    std::vector<ProblemSpec> targets;
    std::vector<EvalGrid> grids;
    for (double a : cfg.alphas) {
        targets.push_back(target_problem(cfg, a));
        grids.push_back(evaluation_grid(targets.back(), cfg));
    }
    std::vector<Eigen::MatrixXd> refs(na);
    parallel_for(na, [&](std::size_t i) {
        refs[i] = reference_solution(targets[i], grids[i], cfg, cfg.reference_rtol);
    });

    std::vector<ScalabilityRow> rows;
    std::mutex mu;
    parallel_for(nm * ns, [&](std::size_t k) {
        const std::size_t m = k / ns, s = k % ns;
        TrainConfig t = cfg.train;
        t.seed = cfg.seeds[s];
        const Checkpoint ck = train(cfg.models[m], cfg.loss, t);
        double alpha_max = 0.0;
        for (const auto& h : cfg.models[m]) alpha_max = std::max(alpha_max, h.alpha);
        for (std::size_t i = 0; i < na; ++i) {
            const auto start = Clock::now();
            const TransferSolution sol = full_transfer(ck, targets[i], cfg);
            const double secs = seconds_since(start);
            const auto e = relative_errors(sol.evaluate(grids[i].points), refs[i]);
            std::lock_guard<std::mutex> lock(mu);
            rows.push_back({alpha_max, make_row(cfg, cfg.alphas[i], Method::STL, e, secs, cfg.seeds[s], hash)});
        }
    });
    std::stable_sort(rows.begin(), rows.end(), [](const ScalabilityRow& a, const ScalabilityRow& b) {
        return std::tie(a.alpha_max, a.metrics.alpha, a.metrics.seed) <
               std::tie(b.alpha_max, b.metrics.alpha, b.metrics.seed);
    });
    return rows;
}

ReparametrizationResult run_reparametrization(const ExperimentConfig& cfg) {
    const std::string hash = config_hash(cfg);
    const std::uint64_t seed = cfg.seeds.front();
    const Checkpoint ck = checkpoint_for_seed(cfg, seed, cfg.heads);
    const double alpha = cfg.repar.alpha;
    const ProblemSpec base = target_problem(cfg, alpha);
    const EvalGrid grid = evaluation_grid(base, cfg);
    auto net = std::make_shared<const BaseNetwork>(ck.net);

    ReparametrizationResult out;
    out.summary.samples = cfg.repar.samples;
    out.summary.full_transfer_s = time_op([&] { full_transfer(ck, base, cfg); }, cfg.timing_repeats).mean;
    const TransferOperator op = target_operator(ck, linearize(base), cfg.transfer);

    // Sampled instances share A, B and C with the base target; only IC or forcing changes.
    std::mt19937_64 rng(cfg.repar.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<ProblemSpec> specs;
    for (std::size_t i = 0; i < cfg.repar.samples; ++i) {
        FamilyParams p = cfg.params;
        switch (cfg.family) {
            case Family::OHO: {
                const double a = 5.0 * unit(rng);
                const double b = 5.0 * unit(rng);
                p.y0 = Vector{a, b};
                break;
            }
            case Family::Duffing: {
                const double a = 0.5 + 1.5 * unit(rng);
                const double b = unit(rng);
                p.y0 = Vector{a, b};
                break;
            }
            case Family::AR: p.y0max = 0.5 + 1.5 * unit(rng); break;
            case Family::NCFF: p.omega = std::numbers::pi * unit(rng); break;
        }
        specs.push_back(instantiate(cfg.family, alpha, p));
    }
    std::vector<Eigen::MatrixXd> refs(specs.size());
    parallel_for(specs.size(), [&](std::size_t i) {
        refs[i] = reference_solution(specs[i], grid, cfg, cfg.reference_rtol);
    });

    // Solves run sequentially so per-solve timings are not contended.
    double total = 0.0, mae = 0.0, l2 = 0.0;
    out.summary.min_solve_s = specs.empty() ? 0.0 : INFINITY;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto start = Clock::now();
        const TransferSolution sol = solve_target(op, specs[i], cfg.p, net);
        const double secs = seconds_since(start);
        const auto e = relative_errors(sol.evaluate(grid.points), refs[i]);
        total += secs;
        out.summary.min_solve_s = std::min(out.summary.min_solve_s, secs);
        mae += e.mae;
        l2 += e.l2_rel;
        out.rows.push_back(make_row(cfg, alpha, Method::STL, e, secs, i, hash));
    }
    if (!specs.empty()) {
        const double n = static_cast<double>(specs.size());
        out.summary.mean_solve_s = total / n;
        out.summary.mean_mae = mae / n;
        out.summary.mean_l2_rel = l2 / n;
    }
    return out;
}

// ---- checkpoints -------------------------------------------------------------------------

json checkpoint_to_json(const Checkpoint& ck) {
    json params = json::object();
    const auto& layers = ck.net.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        params["layer_" + std::to_string(i) + "_w"] = row_major(layers[i].weight);
        params["layer_" + std::to_string(i) + "_b"] = row_major(layers[i].bias);
    }
    json heads = json::array();
    for (std::size_t i = 0; i < ck.heads.size(); ++i) {
        json h = head_to_json(ck.heads[i]);
        h["w"] = row_major(ck.head_weights.at(i));
        heads.push_back(h);
    }
    return {{"format_version", 1},
            {"family", std::string(family_name(ck.family()))},
            {"widths", ck.net.widths()},
            {"activation", "silu"},
            {"seed", ck.net.seed()},
            {"params", params},
            {"heads", heads},
            {"loss_config", loss_to_json(ck.loss)},
            {"train_config", train_to_json(ck.train)},
            {"loss_history",
             {{"total", ck.history.total},
              {"residual", ck.history.residual},
              {"ic", ck.history.ic},
              {"bc", ck.history.bc}}}};
}

Checkpoint checkpoint_from_json(const json& j) {
    if (!j.is_object() || !j.contains("format_version") || !j.at("format_version").is_number_integer())
        throw Error(Errc::SchemaVersionMismatch, "checkpoint has no integer format_version");
    const auto version = j.at("format_version").get<long long>();
    if (version != 1)
        throw Error(Errc::SchemaVersionMismatch, "checkpoint format_version " + std::to_string(version) +
                                                     " is not supported (this build reads version 1)");
    try {
        if (j.at("activation").get<std::string>() != "silu")
            throw Error(Errc::CorruptFloatArray, "only silu networks are supported");
        const auto widths = j.at("widths").get<std::vector<std::size_t>>();
        if (widths.size() < 2) throw Error(Errc::CorruptFloatArray, "widths need at least two entries");
        const json& params = j.at("params");
        std::vector<DenseLayer> layers;
        for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
            const auto out = static_cast<Eigen::Index>(widths[i + 1]), in = static_cast<Eigen::Index>(widths[i]);
            const std::string w = "layer_" + std::to_string(i) + "_w", b = "layer_" + std::to_string(i) + "_b";
            DenseLayer l;
            l.weight = from_row_major(float_array(params, w.c_str(), widths[i + 1] * widths[i]), out, in);
            const auto bias = float_array(params, b.c_str(), widths[i + 1]);
            l.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), out);
            layers.push_back(std::move(l));
        }
        Checkpoint ck;
        ck.net = BaseNetwork::from_layers(std::move(layers), j.at("seed").get<std::uint64_t>());
        const Family family = parse_family(j.at("family").get<std::string>());
        for (const auto& h : j.at("heads")) {
            const HeadConfig head{parse_family(h.at("family").get<std::string>()), h.at("alpha").get<double>(),
                                  family_params_from_json(h.at("params"))};
            const std::size_t n = head.problem().n;
            const auto w = float_array(h, "w", (widths.back() + 1) * n);
            ck.heads.push_back(head);
            ck.head_weights.push_back(
                from_row_major(w, static_cast<Eigen::Index>(widths.back() + 1), static_cast<Eigen::Index>(n)));
        }
        if (ck.heads.empty() || ck.heads[0].family != family)
            throw Error(Errc::CorruptFloatArray, "checkpoint heads do not match its family");
        ck.loss = loss_from_json(j.at("loss_config"), LossConfig{});
        ck.train = train_from_json(j.at("train_config"), TrainConfig{});
        const json& hist = j.at("loss_history");
        ck.history.total = float_array(hist, "total", static_cast<std::size_t>(-1));
        const std::size_t len = ck.history.total.size();
        ck.history.residual = float_array(hist, "residual", len);
        ck.history.ic = float_array(hist, "ic", len);
        ck.history.bc = float_array(hist, "bc", len);
        return ck;
    } catch (const json::exception& e) {
        throw Error(Errc::CorruptFloatArray, std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    write_file(path, checkpoint_to_json(ck).dump());
}

Checkpoint load_checkpoint(const std::string& path) {
    const std::string text = read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        // A cut-off file ends inside one of the float arrays.
        throw Error(Errc::CorruptFloatArray, "'" + path + "' is truncated or not JSON: " + e.what());
    }
    return checkpoint_from_json(j);
}

// ---- emission ----------------------------------------------------------------------------

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::string out(kMetricsHeader);
    out += '\n';
    for (const auto& r : rows) {
        check_csv_field(r.family);
        check_csv_field(r.method);
        check_csv_field(r.config_hash);
        out += r.family + ',' + format_double(r.alpha) + ',' + r.method + ',' + format_double(r.l2_rel) + ',' +
               format_double(r.l1_rel) + ',' + format_double(r.linf_rel) + ',' + format_double(r.mae) + ',' +
               format_double(r.wall_clock_s) + ',' + std::to_string(r.seed) + ',' + r.config_hash + '\n';
    }
    return out;
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
        throw Error(Errc::InvalidConfig, "CSV header does not match the metrics columns");
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 10) throw Error(Errc::InvalidConfig, "CSV row has " + std::to_string(f.size()) + " fields");
        MetricsRow r;
        r.family = f[0];
        r.alpha = parse_double(f[1]);
        r.method = f[2];
        r.l2_rel = parse_double(f[3]);
        r.l1_rel = parse_double(f[4]);
        r.linf_rel = parse_double(f[5]);
        r.mae = parse_double(f[6]);
        r.wall_clock_s = parse_double(f[7]);
        const auto res = std::from_chars(f[8].data(), f[8].data() + f[8].size(), r.seed);
        if (res.ec != std::errc()) throw Error(Errc::InvalidConfig, "bad seed '" + f[8] + "'");
        r.config_hash = f[9];
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string metrics_svg(const std::vector<MetricsRow>& rows) {
    if (rows.empty()) throw Error(Errc::InvalidConfig, "no rows to plot");
    // Seed-averaged l2_rel per (method, alpha).
    std::map<std::string, std::map<double, std::pair<double, int>>> series;
    for (const auto& r : rows) {
        auto& acc = series[r.method][r.alpha];
        acc.first += r.l2_rel;
        acc.second += 1;
    }
    double amin = INFINITY, amax = -INFINITY, emin = INFINITY, emax = -INFINITY;
    for (const auto& [m, pts] : series)
        for (const auto& [a, acc] : pts) {
            const double e = std::max(acc.first / acc.second, 1e-16);
            amin = std::min(amin, a);
            amax = std::max(amax, a);
            emin = std::min(emin, std::log10(e));
            emax = std::max(emax, std::log10(e));
        }
    emin = std::floor(emin);
    emax = std::max(std::ceil(emax), emin + 1.0);
    if (amax == amin) amax = amin + 1.0;

    const double W = 640, H = 420, left = 70, right = 150, top = 20, bottom = 50;
    auto px = [&](double a) { return left + (a - amin) / (amax - amin) * (W - left - right); };
    auto py = [&](double le) { return top + (emax - le) / (emax - emin) * (H - top - bottom); };
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
      << "\" stroke=\"black\"/>\n";
    for (double d = emin; d <= emax; d += 1.0)
        s << "<text x=\"" << left - 8 << "\" y=\"" << py(d) + 4 << "\" font-size=\"11\" text-anchor=\"end\">1e"
          << static_cast<int>(d) << "</text>\n";
    s << "<text x=\"" << px(amin) << "\" y=\"" << H - bottom + 16 << "\" font-size=\"11\" text-anchor=\"middle\">"
      << format_double(amin) << "</text>\n";
    s << "<text x=\"" << px(amax) << "\" y=\"" << H - bottom + 16 << "\" font-size=\"11\" text-anchor=\"middle\">"
      << format_double(amax) << "</text>\n";
    s << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 12
      << "\" font-size=\"12\" text-anchor=\"middle\">alpha</text>\n";
    s << "<text x=\"16\" y=\"" << (top + H - bottom) / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 "
      << (top + H - bottom) / 2 << ")\" text-anchor=\"middle\">L2 relative error</text>\n";
    int k = 0;
    for (const auto& [m, pts] : series) {
        const char* color = colors[k % 6];
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [a, acc] : pts)
            s << px(a) << ',' << py(std::log10(std::max(acc.first / acc.second, 1e-16))) << ' ';
        s << "\"><title>" << m << "</title></polyline>\n";
        s << "<text x=\"" << W - right + 10 << "\" y=\"" << top + 16 * (k + 1) << "\" font-size=\"12\" fill=\""
          << color << "\">" << m << "</text>\n";
        ++k;
    }
    s << "</svg>\n";
    return s.str();
}

void emit_results(const std::vector<MetricsRow>& rows, const std::string& path, OutputFormat format) {
    write_file(path, format == OutputFormat::Csv ? metrics_csv(rows) : metrics_svg(rows));
}

std::string solution_csv(const EvalGrid& grid, const Eigen::MatrixXd& values) {
    if (values.cols() != grid.points.cols())
        throw Error(Errc::DimensionMismatch, "solution values do not match the grid");
    std::string out = grid.points.rows() == 1 ? "t" : "t,x";
    for (Eigen::Index c = 0; c < values.rows(); ++c) out += ",y" + std::to_string(c + 1);
    out += '\n';
    for (Eigen::Index k = 0; k < values.cols(); ++k) {
        for (Eigen::Index r = 0; r < grid.points.rows(); ++r) {
            if (r > 0) out += ',';
            out += format_double(grid.points(r, k));
        }
        for (Eigen::Index c = 0; c < values.rows(); ++c) out += ',' + format_double(values(c, k));
        out += '\n';
    }
    return out;
}

void emit_scalability(const std::vector<ScalabilityRow>& rows, const std::string& path) {
    std::vector<MetricsRow> metrics;
    for (const auto& r : rows) metrics.push_back(r.metrics);
    const std::string body = metrics_csv(metrics);
    std::istringstream in(body);
    std::string line, out;
    std::getline(in, line);
    out = "alpha_max," + line + '\n';
    for (const auto& r : rows) {
        std::getline(in, line);
        out += format_double(r.alpha_max) + ',' + line + '\n';
    }
    write_file(path, out);
}

void emit_reparametrization_summary(const ReparametrizationSummary& s, std::string_view family,
                                    double alpha, const std::string& path) {
    std::string out = "family,alpha,samples,mean_solve_s,min_solve_s,full_transfer_s,mean_mae,mean_l2_rel\n";
    out += std::string(family) + ',' + format_double(alpha) + ',' + std::to_string(s.samples) + ',' +
           format_double(s.mean_solve_s) + ',' + format_double(s.min_solve_s) + ',' +
           format_double(s.full_transfer_s) + ',' + format_double(s.mean_mae) + ',' +
           format_double(s.mean_l2_rel) + '\n';
    write_file(path, out);
}

}  // namespace stlpinn
