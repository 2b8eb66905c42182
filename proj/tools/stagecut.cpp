// stagecut CLI: schedule tables, denoiser queries, similarity studies,
// interval solvers, baselines, PF-ODE sampling, and compute budgeting.
// Machine-first outputs: CSV artifacts with JSON sidecars, JSON on stdout.
// Exit codes: 0 success, 1 runtime/file error, 2 usage/argument error.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "stagecut/budget.hpp"
#include "stagecut/cluster.hpp"
#include "stagecut/dataset.hpp"
#include "stagecut/denoiser.hpp"
#include "stagecut/error.hpp"
#include "stagecut/sampler.hpp"
#include "stagecut/schedule.hpp"
#include "stagecut/similarity.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace stagecut;

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Paths resolve against the working directory first, then $STAGECUT_DATA_DIR.
std::string resolve_path(const std::string& p) {
    if (fs::exists(p)) return p;
    if (const char* root = std::getenv("STAGECUT_DATA_DIR")) {
        const fs::path cand = fs::path(root) / p;
        if (fs::exists(cand)) return cand.string();
    }
    throw FormatError("file not found: " + p + " (also tried under $STAGECUT_DATA_DIR)");
}

std::vector<double> parse_row(const std::string& line) {
    std::vector<double> vals;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end) {
        while (p < end && (*p == ' ' || *p == '\r')) ++p;
        double v = 0.0;
        const auto res = std::from_chars(p, end, v);
        if (res.ec != std::errc()) throw FormatError("cannot parse number in row: " + line);
        vals.push_back(v);
        p = res.ptr;
        while (p < end && (*p == ' ' || *p == '\r')) ++p;
        if (p < end) {
            if (*p != ',') throw FormatError("expected ',' in row: " + line);
            ++p;
        }
    }
    if (vals.empty()) throw FormatError("empty vector row");
    return vals;
}

// First parseable numeric row of a CSV file (a leading header is skipped).
std::vector<double> read_vector_file(const std::string& path) {
    std::ifstream in(resolve_path(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            return parse_row(line);
        } catch (const FormatError&) {
            continue;
        }
    }
    throw FormatError("no numeric row found in " + path);
}

// Config overlay: `key = value` lines, `#` comments. Keys name long flags
// without the leading dashes. Command-line flags keep precedence; unknown
// keys are usage errors listing the offenders.
void apply_config_file(CLI::App* cmd, const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config file: cannot open " + path);
    const auto strip = [](const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    std::string line, unknown;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (strip(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": empty key");
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (opt == nullptr) {
            unknown += unknown.empty() ? key : ", " + key;
            continue;
        }
        if (opt->count() > 0) continue; // the command line wins
        try {
            opt->add_result(value);
            opt->run_callback();
        } catch (const CLI::Error&) {
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": cannot parse value '" + value + "' for key " + key);
        }
    }
    if (!unknown.empty())
        throw std::invalid_argument("config file " + path + ": unknown keys: " + unknown);
}

struct ScheduleArgs {
    double beta_d = 19.9;
    double beta_min = 0.1;
    double t_min = 1e-3;

    void attach(CLI::App* cmd) {
        cmd->add_option("--beta-d", beta_d, "VP schedule beta_d")->capture_default_str();
        cmd->add_option("--beta-min", beta_min, "VP schedule beta_min")->capture_default_str();
        cmd->add_option("--t-min", t_min, "smallest usable time eps_t")->capture_default_str();
    }
    VpSchedule make() const { return {beta_d, beta_min, t_min}; }
    json echo() const {
        return {{"beta_d", beta_d}, {"beta_min", beta_min}, {"t_min", t_min}};
    }
};

struct DatasetArgs {
    std::vector<std::string> paths;
    std::string data_range = "0,1";
    std::size_t sub = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--dataset", paths,
                        "dataset file(s): one .csv or CIFAR-10 .bin batches in order")
            ->required();
        cmd->add_option("--data-range", data_range, "declared pixel range lo,hi for binary data")
            ->capture_default_str();
        cmd->add_option("--subsample", sub, "subsample to this many points (seeded)")
            ->capture_default_str();
    }

    Dataset load(std::uint64_t seed) const {
        bool any_bin = false, any_csv = false;
        std::vector<std::string> resolved;
        for (const auto& p : paths) {
            resolved.push_back(resolve_path(p));
            if (p.size() >= 4 && p.substr(p.size() - 4) == ".csv")
                any_csv = true;
            else
                any_bin = true;
        }
        if (any_bin && any_csv)
            throw std::invalid_argument("--dataset: cannot mix .csv and binary batches");
        if (any_csv && resolved.size() != 1)
            throw std::invalid_argument("--dataset: exactly one .csv file expected");

        Dataset d = any_csv ? load_csv(resolved[0]) : load_cifar10(resolved);
        if (any_bin && data_range != "0,1") {
            double lo = 0.0, hi = 1.0;
            if (std::sscanf(data_range.c_str(), "%lf,%lf", &lo, &hi) != 2 || !(hi > lo))
                throw std::invalid_argument("--data-range: expected 'lo,hi' with hi > lo");
            std::vector<double> flat(d.data(), d.data() + d.size() * d.dim());
            for (auto& v : flat) v = lo + v * (hi - lo);
            d = Dataset(std::move(flat), d.dim(), {lo, hi}, d.source() + ":range");
        }
        if (sub > 0) d = subsample(d, sub, seed);
        return d;
    }

    json echo(const Dataset& d) const {
        char cs[20];
        std::snprintf(cs, sizeof cs, "%016llx",
                      static_cast<unsigned long long>(d.checksum()));
        return {{"count", d.size()},
                {"dim", d.dim()},
                {"checksum_fnv1a64", cs},
                {"source", d.source()},
                {"range", {d.range().first, d.range().second}}};
    }
};

void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    out << body;
}

void write_sidecar(const std::string& artifact, const json& j) {
    write_text(artifact + ".json", j.dump(2) + "\n");
}

void emit_json(const json& j, const std::string& out) {
    if (out.empty())
        std::cout << j.dump(2) << "\n";
    else
        write_text(out, j.dump(2) + "\n");
}

json vector_summary(const std::vector<double>& v) {
    double l2 = 0.0, lo = v[0], hi = v[0];
    for (const double x : v) {
        l2 += x * x;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    json head = json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(8, v.size()); ++i) head.push_back(v[i]);
    return {{"dim", v.size()}, {"l2_norm", std::sqrt(l2)}, {"min", lo}, {"max", hi},
            {"head", head}};
}

json grid_echo(const GridSpec& g) {
    return {{"points", g.points.size()}, {"first", g.points.front()}, {"last", g.points.back()}};
}

// Seed recorded in the store's sidecar, if one is present.
json store_seed(const std::string& store_path) {
    std::ifstream side(store_path + ".json");
    if (!side) return nullptr;
    try {
        json j;
        side >> j;
        if (j.contains("config") && j["config"].contains("seed")) return j["config"]["seed"];
    } catch (...) {
    }
    return nullptr;
}

} // namespace

int main(int argc, char** argv) {
    std::string config_path; // shared --config slot; one subcommand parses per run
    CLI::App app{"stagecut: timestep clustering for diffusion schedules via the "
                 "closed-form optimal denoiser"};
    app.require_subcommand(1);

    // ---- schedule-table ----
    auto* sc_table = app.add_subcommand("schedule-table",
                                        "emit CSV t,s,sigma,snr over a uniform time grid");
    ScheduleArgs table_sched;
    table_sched.attach(sc_table);
    std::size_t table_points = 101;
    std::string table_out;
    sc_table->add_option("--points", table_points, "grid size")->capture_default_str();
    sc_table->add_option("--out", table_out, "output CSV path (default stdout)");
    sc_table->add_option("--config", config_path, "key = value config file");
    sc_table->callback([&] {
        apply_config_file(sc_table, config_path);
        if (table_points < 2) throw std::invalid_argument("--points must be >= 2");
        const VpSchedule sched = table_sched.make();
        std::ostringstream csv;
        csv << "t,s,sigma,snr\n";
        for (std::size_t i = 0; i < table_points; ++i) {
            const double t = sched.t_min() + (1.0 - sched.t_min()) * static_cast<double>(i) /
                                                 static_cast<double>(table_points - 1);
            const auto k = kernel_at(sched, t);
            csv << fmt17(t) << ',' << fmt17(k.s) << ',' << fmt17(k.sigma) << ','
                << fmt17(snr(sched, t)) << '\n';
        }
        if (table_out.empty()) {
            std::cout << csv.str();
        } else {
            write_text(table_out, csv.str());
            write_sidecar(table_out, {{"command", "schedule-table"},
                                      {"schedule", table_sched.echo()},
                                      {"config", {{"points", table_points}}},
                                      {"artifact", table_out}});
        }
    });

    // ---- denoise ----
    auto* sc_den = app.add_subcommand("denoise", "evaluate the optimal denoiser at one query");
    ScheduleArgs den_sched;
    DatasetArgs den_data;
    den_sched.attach(sc_den);
    den_data.attach(sc_den);
    double den_t = 0.5;
    std::string den_x, den_query, den_out;
    std::uint64_t den_seed = 0;
    bool den_nn = false;
    sc_den->add_option("--t", den_t, "evaluation time")->required();
    sc_den->add_option("--x", den_x, "inline query vector 'v0,v1,...'");
    sc_den->add_option("--query", den_query, "CSV file holding the query row");
    sc_den->add_option("--seed", den_seed, "seed for --subsample")->capture_default_str();
    sc_den->add_flag("--nn-shortcut", den_nn, "argmax short-circuit at near-1 softmax weight");
    sc_den->add_option("--out", den_out, "output JSON path (default stdout)");
    sc_den->add_option("--config", config_path, "key = value config file");
    sc_den->callback([&] {
        apply_config_file(sc_den, config_path);
        if (den_x.empty() == den_query.empty())
            throw std::invalid_argument("denoise: provide exactly one of --x / --query");
        const VpSchedule sched = den_sched.make();
        const Dataset d = den_data.load(den_seed);
        const std::vector<double> x = den_x.empty() ? read_vector_file(den_query)
                                                    : parse_row(den_x);
        const auto eval = optimal_eps(d, kernel_at(sched, den_t), x, {den_nn});
        emit_json({{"command", "denoise"},
                   {"t", den_t},
                   {"schedule", den_sched.echo()},
                   {"dataset", den_data.echo(d)},
                   {"config", {{"nn_shortcut", den_nn}, {"seed", den_seed}}},
                   {"log_partition", eval.log_partition},
                   {"max_log_weight", eval.max_log_weight},
                   {"y_hat_summary", vector_summary(eval.y_hat)},
                   {"eps_star_summary", vector_summary(eval.eps_star)}},
                  den_out);
    });

    // ---- similarity ----
    auto* sc_sim = app.add_subcommand(
        "similarity", "run the endpoint or pair Monte-Carlo study and persist the store");
    ScheduleArgs sim_sched;
    DatasetArgs sim_data;
    sim_sched.attach(sc_sim);
    sim_data.attach(sc_sim);
    std::string sim_mode = "endpoint", sim_out;
    SimilarityConfig sim_cfg;
    double sim_tlo = -1.0, sim_thi = 1.0;
    unsigned sim_threads = 0;
    sc_sim->add_option("--mode", sim_mode, "endpoint | pair")
        ->check(CLI::IsMember({"endpoint", "pair"}))
        ->capture_default_str();
    sc_sim->add_option("--k", sim_cfg.k_samples, "number of Monte-Carlo samples K")
        ->capture_default_str();
    sc_sim->add_option("--eta", sim_cfg.eta, "per-coordinate agreement threshold")
        ->capture_default_str();
    sc_sim->add_option("--seed", sim_cfg.seed, "master seed")->capture_default_str();
    sc_sim->add_option("--t-lo", sim_tlo, "lower endpoint (default: schedule t_min)");
    sc_sim->add_option("--t-hi", sim_thi, "upper endpoint")->capture_default_str();
    sc_sim->add_option("--threads", sim_threads, "worker threads (0 = hardware)")
        ->capture_default_str();
    sc_sim->add_option("--out", sim_out, "store CSV path")->required();
    sc_sim->add_option("--config", config_path, "key = value config file");
    sc_sim->callback([&] {
        apply_config_file(sc_sim, config_path);
        const VpSchedule sched = sim_sched.make();
        const Dataset d = sim_data.load(sim_cfg.seed);
        sim_cfg.t_lo = sim_tlo < 0.0 ? sched.t_min() : sim_tlo;
        sim_cfg.t_hi = sim_thi;
        if (sim_mode == "endpoint")
            write_endpoint_store(run_endpoint_study(d, sched, sim_cfg, sim_threads), sim_out);
        else
            write_pair_store(run_pair_study(d, sched, sim_cfg, sim_threads), sim_out);
        write_sidecar(sim_out,
                      {{"command", "similarity"},
                       {"mode", sim_mode},
                       {"config",
                        {{"eta", sim_cfg.eta},
                         {"k_samples", sim_cfg.k_samples},
                         {"seed", sim_cfg.seed},
                         {"t_lo", sim_cfg.t_lo},
                         {"t_hi", sim_cfg.t_hi},
                         {"threads", sim_threads}}},
                       {"schedule", sim_sched.echo()},
                       {"dataset", sim_data.echo(d)},
                       {"artifact", sim_out}});
    });

    // ---- cluster3 ----
    auto* sc_c3 = app.add_subcommand("cluster3",
                                     "three-interval threshold search over an endpoint store");
    ScheduleArgs c3_sched;
    c3_sched.attach(sc_c3);
    std::string c3_store, c3_out;
    double c3_alpha = 0.9;
    std::size_t c3_grid = 10000, c3_support = 10;
    sc_c3->add_option("--store", c3_store, "endpoint store CSV")->required();
    sc_c3->add_option("--alpha", c3_alpha, "acceptance level")->capture_default_str();
    sc_c3->add_option("--grid", c3_grid, "uniform candidate-grid size")->capture_default_str();
    sc_c3->add_option("--min-support", c3_support, "samples required per candidate")
        ->capture_default_str();
    sc_c3->add_option("--out", c3_out, "output JSON path (default stdout)");
    sc_c3->add_option("--config", config_path, "key = value config file");
    sc_c3->callback([&] {
        apply_config_file(sc_c3, config_path);
        const VpSchedule sched = c3_sched.make();
        const auto store = read_endpoint_store(resolve_path(c3_store));
        const GridSpec grid = GridSpec::uniform(c3_grid, sched.t_min(), 1.0);
        const auto res = solve_three_interval(store, c3_alpha, grid, c3_support);
        emit_json({{"method", to_string(res.partition.method)},
                   {"cuts", res.partition.cuts},
                   {"achieved_means", {{"s0", res.mean_s0}, {"s1", res.mean_s1}}},
                   {"config",
                    {{"alpha", c3_alpha},
                     {"min_support", c3_support},
                     {"k_samples", store.size()},
                     {"store", c3_store}}},
                   {"seed", store_seed(resolve_path(c3_store))},
                   {"grid", grid_echo(grid)},
                   {"schedule", c3_sched.echo()}},
                  c3_out);
    });

    // ---- clustern ----
    auto* sc_cn = app.add_subcommand("clustern",
                                     "exact n-interval DP over a pair store");
    ScheduleArgs cn_sched;
    cn_sched.attach(sc_cn);
    std::string cn_store, cn_out;
    std::size_t cn_n = 3, cn_uniform = 0, cn_gcount = 40;
    double cn_gstart = 0.001, cn_gstep = 0.025;
    bool cn_literal = false, cn_no_one = false;
    sc_cn->add_option("--store", cn_store, "pair store CSV")->required();
    sc_cn->add_option("--n", cn_n, "number of intervals")->required();
    sc_cn->add_option("--grid-start", cn_gstart, "stepped grid start")->capture_default_str();
    sc_cn->add_option("--grid-step", cn_gstep, "stepped grid step")->capture_default_str();
    sc_cn->add_option("--grid-count", cn_gcount, "stepped grid point count")
        ->capture_default_str();
    sc_cn->add_flag("--no-append-one", cn_no_one, "do not append t = 1 to the stepped grid");
    sc_cn->add_option("--uniform-grid", cn_uniform,
                      "use a uniform grid of this size instead of the stepped grid");
    sc_cn->add_flag("--literal-objective", cn_literal,
                    "minimize within-interval similarity (literal form) instead of dissimilarity");
    sc_cn->add_option("--out", cn_out, "output JSON path (default stdout)");
    sc_cn->add_option("--config", config_path, "key = value config file");
    sc_cn->callback([&] {
        apply_config_file(sc_cn, config_path);
        const VpSchedule sched = cn_sched.make();
        const auto store = read_pair_store(resolve_path(cn_store));
        const GridSpec grid = cn_uniform > 0
                                  ? GridSpec::uniform(cn_uniform, sched.t_min(), 1.0)
                                  : GridSpec::stepped(cn_gstart, cn_gstep, cn_gcount, !cn_no_one);
        const auto obj = cn_literal ? NIntervalObjective::within_similarity_literal
                                    : NIntervalObjective::within_dissimilarity;
        const auto res = solve_n_interval(store, cn_n, grid, obj);
        emit_json({{"method", to_string(res.partition.method)},
                   {"cuts", res.partition.cuts},
                   {"objective_value", res.objective},
                   {"config",
                    {{"n", cn_n},
                     {"objective", res.partition.config_echo.at("objective")},
                     {"k_samples", store.size()},
                     {"store", cn_store}}},
                   {"seed", store_seed(resolve_path(cn_store))},
                   {"grid", grid_echo(grid)},
                   {"schedule", cn_sched.echo()}},
                  cn_out);
    });

    // ---- baseline ----
    auto* sc_base = app.add_subcommand("baseline", "uniform-t / uniform-logSNR partitions");
    ScheduleArgs base_sched;
    base_sched.attach(sc_base);
    std::string base_method, base_out;
    std::size_t base_n = 3, base_grid = 10000;
    sc_base->add_option("--method", base_method, "uniform-t | uniform-logsnr")
        ->check(CLI::IsMember({"uniform-t", "uniform-logsnr"}))
        ->required();
    sc_base->add_option("--n", base_n, "number of intervals")->capture_default_str();
    sc_base->add_option("--grid", base_grid, "uniform candidate-grid size")->capture_default_str();
    sc_base->add_option("--out", base_out, "output JSON path (default stdout)");
    sc_base->add_option("--config", config_path, "key = value config file");
    sc_base->callback([&] {
        apply_config_file(sc_base, config_path);
        const VpSchedule sched = base_sched.make();
        const GridSpec grid = GridSpec::uniform(base_grid, sched.t_min(), 1.0);
        const Partition p = base_method == "uniform-t"
                                ? baseline_uniform_t(base_n, grid)
                                : baseline_uniform_logsnr(base_n, sched, grid);
        emit_json({{"method", to_string(p.method)},
                   {"cuts", p.cuts},
                   {"config", {{"n", base_n}}},
                   {"grid", grid_echo(grid)},
                   {"schedule", base_sched.echo()}},
                  base_out);
    });

    // ---- sample ----
    auto* sc_samp = app.add_subcommand("sample", "integrate the probability-flow ODE");
    ScheduleArgs samp_sched;
    DatasetArgs samp_data;
    samp_sched.attach(sc_samp);
    samp_data.attach(sc_samp);
    std::size_t samp_steps = 200, samp_every = 0;
    std::string samp_method = "heun", samp_xinit, samp_out, samp_traj;
    std::uint64_t samp_seed = 0;
    sc_samp->add_option("--steps", samp_steps, "integrator steps")->capture_default_str();
    sc_samp->add_option("--method", samp_method, "euler | heun")
        ->check(CLI::IsMember({"euler", "heun"}))
        ->capture_default_str();
    sc_samp->add_option("--seed", samp_seed, "seed for the Gaussian x_init")
        ->capture_default_str();
    sc_samp->add_option("--x-init", samp_xinit, "CSV file with an explicit initial state");
    sc_samp->add_option("--record-every", samp_every, "trajectory checkpoint stride")
        ->capture_default_str();
    sc_samp->add_option("--trajectory-out", samp_traj, "trajectory CSV path");
    sc_samp->add_option("--out", samp_out, "x_final CSV path (default stdout)");
    sc_samp->add_option("--config", config_path, "key = value config file");
    sc_samp->callback([&] {
        apply_config_file(sc_samp, config_path);
        const VpSchedule sched = samp_sched.make();
        const Dataset d = samp_data.load(samp_seed);
        const OdeMethod method =
            samp_method == "euler" ? OdeMethod::euler : OdeMethod::heun;
        const std::size_t every =
            samp_traj.empty() ? samp_every : (samp_every == 0 ? 1 : samp_every);
        const OdeRun run =
            samp_xinit.empty()
                ? sample(d, sched, samp_seed, samp_steps, method, every)
                : sample(d, sched, read_vector_file(samp_xinit), samp_steps, method, every);
        std::ostringstream row;
        for (std::size_t j = 0; j < run.x_final.size(); ++j)
            row << (j ? "," : "") << fmt17(run.x_final[j]);
        row << '\n';
        const auto near = nearest_point(d, run.x_final);
        if (samp_out.empty()) {
            std::cout << row.str();
        } else {
            write_text(samp_out, row.str());
            write_sidecar(samp_out,
                          {{"command", "sample"},
                           {"config",
                            {{"steps", samp_steps},
                             {"method", samp_method},
                             {"seed", samp_seed},
                             {"x_init", samp_xinit.empty() ? json("gaussian") : json(samp_xinit)},
                             {"record_every", every}}},
                           {"schedule", samp_sched.echo()},
                           {"dataset", samp_data.echo(d)},
                           {"nearest_point", {{"index", near.index}, {"distance", near.distance}}},
                           {"artifact", samp_out}});
        }
        if (!samp_traj.empty()) {
            std::ostringstream tcsv;
            tcsv << "t";
            for (std::size_t j = 0; j < d.dim(); ++j) tcsv << ",coord_" << j;
            tcsv << '\n';
            for (const auto& [t, xs] : run.trajectory) {
                tcsv << fmt17(t);
                for (const double v : xs) tcsv << ',' << fmt17(v);
                tcsv << '\n';
            }
            write_text(samp_traj, tcsv.str());
        }
    });

    // ---- budget ----
    auto* sc_bud = app.add_subcommand("budget", "NFE-weighted GFLOPs and training PFLOPs");
    std::string bud_stages, bud_out;
    double bud_iters = 0.0;
    sc_bud->add_option("--stages", bud_stages, "CSV with header gflops,steps")->required();
    sc_bud->add_option("--iterations", bud_iters, "training iterations")->required();
    sc_bud->add_option("--out", bud_out, "output JSON path (default stdout)");
    sc_bud->add_option("--config", config_path, "key = value config file");
    sc_bud->callback([&] {
        apply_config_file(sc_bud, config_path);
        std::ifstream in(resolve_path(bud_stages));
        std::string line;
        if (!std::getline(in, line)) throw FormatError("budget: empty stages file");
        while (!line.empty() && line.back() == '\r') line.pop_back();
        if (line != "gflops,steps")
            throw FormatError("budget: expected header 'gflops,steps', got '" + line + "'");
        std::vector<StageBudget> stages;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto vals = parse_row(line);
            if (vals.size() != 2) throw FormatError("budget: expected two columns per stage row");
            stages.push_back({vals[0], static_cast<std::size_t>(vals[1])});
        }
        const double wg = weighted_gflops(stages);
        const double tp = training_pflops({bud_iters, wg});
        emit_json({{"command", "budget"},
                   {"config", {{"iterations", bud_iters}, {"stages", bud_stages}}},
                   {"weighted_gflops", wg},
                   {"training_pflops", tp},
                   {"training_pflops_rounded", round2(tp)}},
                  bud_out);
    });

    // ---- convert ----
    auto* sc_conv = app.add_subcommand("convert", "translate between VP time and VE sigma");
    ScheduleArgs conv_sched;
    conv_sched.attach(sc_conv);
    double conv_t = -1.0, conv_sigma = -1.0;
    std::string conv_out;
    sc_conv->add_option("--t", conv_t, "VP time to convert to a VE sigma");
    sc_conv->add_option("--sigma", conv_sigma, "VE sigma to convert to a VP time");
    sc_conv->add_option("--out", conv_out, "output JSON path (default stdout)");
    sc_conv->add_option("--config", config_path, "key = value config file");
    sc_conv->callback([&] {
        apply_config_file(sc_conv, config_path);
        const VpSchedule sched = conv_sched.make();
        if ((conv_t >= 0.0) == (conv_sigma >= 0.0))
            throw std::invalid_argument("convert: provide exactly one of --t / --sigma");
        double t, sigma;
        if (conv_t >= 0.0) {
            t = conv_t;
            sigma = ve_sigma_equivalent(sched, t);
        } else {
            sigma = conv_sigma;
            t = t_of_snr(sched, 1.0 / (sigma * sigma));
        }
        emit_json({{"command", "convert"},
                   {"schedule", conv_sched.echo()},
                   {"t", t},
                   {"ve_sigma", sigma}},
                  conv_out);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "argument error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
