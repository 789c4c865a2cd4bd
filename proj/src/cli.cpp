#include "riskprof/cli.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "riskprof/contingency_sampler.hpp"
#include "riskprof/greedy_flow.hpp"
#include "riskprof/instance_io.hpp"
#include "riskprof/k_stock.hpp"
#include "riskprof/oracle.hpp"
#include "riskprof/portfolio_sweep.hpp"

namespace riskprof {

using nlohmann::json;

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 digest failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

namespace {

constexpr std::uint64_t kDefaultSeed = 42;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ParseError, "cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
        if (used == 0 || used != item.size()) throw Error(ErrorCode::InvalidPortfolio, "bad weight '" + item + "'");
        out.push_back(v);
    }
    return out;
}

Portfolio parse_portfolio(const std::string& text, std::size_t k) {
    const auto w = parse_list(text);
    if (w.size() != k) {
        std::ostringstream msg;
        msg << "portfolio has " << w.size() << " weights for " << k << " stocks";
        throw Error(ErrorCode::DimensionMismatch, msg.str());
    }
    return make_portfolio(Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())));
}

json portfolio_json(const Portfolio& p) {
    json out = json::array();
    for (Eigen::Index i = 0; i < p.size(); ++i) out.push_back(p[i]);
    return out;
}

void require_two(const Instance& inst, const char* command) {
    if (inst.stocks.size() != 2)
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(command) + " works on two stocks; use the -k variant for more");
}

std::uint64_t resolve_seed(std::uint64_t flag) {
    const char* env = std::getenv("RISKPROF_SEED");
    if (!env || !*env) return flag;
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(env, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || env[used] != '\0') throw Error(ErrorCode::ParseError, "RISKPROF_SEED is not an integer");
    return v;
}

struct Flags {
    std::string stocks;
    std::string prices;
    std::string out_file;
    std::string plot;
    std::string weights;
    std::string objective = "ra_w";
    std::string mode = "cents";
    double alpha = 0.0;
    double floor = 0.0;
    double eps = 0.05;
    double delta = 0.1;
    double striping = 0.0;
    double mu = 1.0;
    int m1 = 0;
    int m2 = 200;
    int period = 1;
    int cents = 0;
    int search_cents = 100;
    double budget = 2e6;
    std::size_t chains = 1;
    std::size_t steps = 0;
    std::uint64_t seed = kDefaultSeed;
    bool witness = false;
    bool oracle = false;
    bool exact = false;
};

void write_plot(const std::string& path, const Instance& inst, double alpha, const Objective& objective) {
    const auto& s1 = inst.stocks[0].dist;
    const auto& s2 = inst.stocks[1].dist;
    std::vector<double> xs{0.0, 1.0};
    for (const auto& e : enumerate_slope_events(inst.grid, alpha)) xs.push_back(e.t);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end(), [](double a, double b) { return b - a <= 1e-12; }), xs.end());
    std::vector<double> points;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i > 0) points.push_back(0.5 * (xs[i - 1] + xs[i]));
        points.push_back(xs[i]);
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
    out << "# x1 " << to_string(objective) << "\n" << std::setprecision(17);
    for (double x : points)
        out << x << ' ' << worst_case_two_stock(s1, s2, two_stock_portfolio(x), alpha, objective) << '\n';
}

json run_validate(const Flags& f, std::string& input) {
    input = read_file(f.stocks);
    const Instance inst = parse_instance_text(input, ValidationOptions{f.floor});
    json names = json::array();
    for (const auto& s : inst.stocks) names.push_back(s.name);
    return {{"valid", true}, {"k", inst.stocks.size()}, {"m", inst.grid.size()}, {"stocks", names}};
}

json run_eval(const Flags& f, std::string& input, std::uint64_t seed) {
    input = read_file(f.stocks);
    const Instance inst = parse_instance_text(input, ValidationOptions{f.floor});
    require_two(inst, "eval");
    const Objective obj = parse_objective(f.objective);
    const Portfolio p = parse_portfolio(f.weights, 2);
    const auto& s1 = inst.stocks[0].dist;
    const auto& s2 = inst.stocks[1].dist;
    json res{{"objective", to_string(obj)}, {"alpha", f.alpha}, {"portfolio", portfolio_json(p)}};
    if (obj.kase == Case::Average) {
        const auto est = average_objective(s1, s2, f.alpha, p, obj, f.eps, f.delta,
                                           EstimateConfig{seed, f.steps, f.chains});
        res["value"] = est.estimate;
        res["N"] = est.samples;
        return res;
    }
    res["value"] = worst_case_two_stock(s1, s2, p, f.alpha, obj);
    if (f.witness) {
        const RegionSpec region = objective_region(obj, f.alpha, p);
        const bool direct = objective_maximizes_mass(obj);
        const auto flow = greedy_flow({s1, s2, direct ? region : complement_region(region)}, FlowOptions{true});
        const Eigen::MatrixXd table = witness_table(inst.grid, flow.witness).matrix();
        json rows = json::array();
        for (Eigen::Index i = 0; i < table.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index j = 0; j < table.cols(); ++j) row.push_back(table(i, j));
            rows.push_back(row);
        }
        res["witness"] = {{"region", direct ? "objective" : "complement"}, {"flow", flow.value}, {"table", rows}};
    }
    if (f.oracle) res["oracle"] = maxflow_objective(s1, s2, p, f.alpha, obj);
    return res;
}

json run_optimize(const Flags& f, std::string& input) {
    input = read_file(f.stocks);
    const Instance inst = parse_instance_text(input, ValidationOptions{f.floor});
    require_two(inst, "optimize");
    const Objective obj = parse_objective(f.objective);
    const auto& s1 = inst.stocks[0].dist;
    const auto& s2 = inst.stocks[1].dist;
    const SweepResult r = sweep_optimal_portfolio(s1, s2, f.alpha, obj);
    json res{{"objective", to_string(obj)},   {"alpha", f.alpha},   {"value", r.value},
             {"portfolio", portfolio_json(r.portfolio)}, {"x1_range", {r.t_lo, r.t_hi}},
             {"events", r.events},           {"swaps", r.swaps}};
    if (f.oracle) res["oracle"] = exhaustive_two_stock_optimum(s1, s2, f.alpha, obj, true).value;
    if (!f.plot.empty()) {
        write_plot(f.plot, inst, f.alpha, obj);
        res["plot"] = f.plot;
    }
    return res;
}

json run_eval_k(const Flags& f, std::string& input) {
    input = read_file(f.stocks);
    const Instance inst = parse_instance_text(input, ValidationOptions{f.floor});
    const Objective obj = parse_objective(f.objective);
    const Portfolio p = parse_portfolio(f.weights, inst.stocks.size());
    const auto dists = inst.marginals();
    const int methods = (f.striping > 0.0 ? 1 : 0) + (f.cents > 0 ? 1 : 0) + (f.exact ? 1 : 0);
    if (methods > 1) throw Error(ErrorCode::ParseError, "choose one of --exact, --striping, --cents");
    KStockOptions opt;
    KStockResult r;
    std::string method = "exact";
    if (f.striping > 0.0) {
        method = "striping";
        r = striping_worst_case(dists, p, f.alpha, f.striping, obj, opt);
    } else if (f.cents > 0) {
        method = "cents";
        r = cents_worst_case_exact(dists, p, f.alpha, f.cents, obj, opt);
    } else {
        r = lp_worst_case_exact(dists, p, f.alpha, obj, opt);
    }
    json res{{"objective", to_string(obj)}, {"alpha", f.alpha}, {"portfolio", portfolio_json(p)},
             {"method", method},          {"value", r.value}, {"variables", r.variables},
             {"constraints", r.constraints}, {"pivots", r.pivots}};
    if (f.striping > 0.0) res["epsilon"] = f.striping;
    if (f.cents > 0) res["c"] = f.cents;
    if (f.oracle) res["oracle"] = lp_worst_case_exact(dists, p, f.alpha, obj, opt).value;
    return res;
}

json run_optimize_k(const Flags& f, std::string& input) {
    input = read_file(f.stocks);
    const Instance inst = parse_instance_text(input, ValidationOptions{f.floor});
    const Objective obj = parse_objective(f.objective);
    SearchOptions opt;
    if (f.mode == "cents") opt.mode = SearchMode::CentGrid;
    else if (f.mode == "hyperplanes") opt.mode = SearchMode::CandidateHyperplanes;
    else throw Error(ErrorCode::ParseError, "mode must be 'cents' or 'hyperplanes'");
    opt.cents = f.search_cents;
    opt.candidate_budget = f.budget;
    const auto dists = inst.marginals();
    const SearchResult r = optimal_portfolio_fixed_k(dists, f.alpha, obj, opt);
    json res{{"objective", to_string(obj)}, {"alpha", f.alpha},        {"mode", f.mode},
             {"value", r.value},          {"portfolio", portfolio_json(r.portfolio)},
             {"candidates", r.candidates}, {"evaluations", r.evaluations}};
    if (opt.mode == SearchMode::CentGrid) res["c"] = opt.cents;
    return res;
}

json run_avg(const Flags& f, std::string& input, std::uint64_t seed) {
    input = read_file(f.stocks);
    const Instance inst = parse_instance_text(input, ValidationOptions{f.floor});
    require_two(inst, "avg");
    const Objective obj = parse_objective(f.objective);
    if (obj.kase != Case::Average)
        throw Error(ErrorCode::UnsupportedObjective, "avg takes ra_a, ag_a or their strict variants");
    const Portfolio p = parse_portfolio(f.weights, 2);
    const auto est = average_objective(inst.stocks[0].dist, inst.stocks[1].dist, f.alpha, p, obj, f.eps, f.delta,
                                       EstimateConfig{seed, f.steps, f.chains});
    return {{"objective", to_string(obj)},
            {"alpha", f.alpha},
            {"portfolio", portfolio_json(p)},
            {"estimate", est.estimate},
            {"N", est.samples},
            {"chains", est.chains},
            {"steps_per_sample", est.steps_per_sample},
            {"sample_variance", est.sample_variance},
            {"epsilon", f.eps},
            {"delta", f.delta}};
}

json run_ingest(const Flags& f, std::string& input) {
    input = read_file(f.prices);
    const auto rows = parse_price_csv(input);
    const IngestResult r = ingest_prices(rows, f.period, ReturnGrid(f.mu, f.m1, f.m2));
    const json inst = instance_to_json(r.instance);
    if (!f.out_file.empty()) {
        std::ofstream out(f.out_file);
        if (!out) throw Error(ErrorCode::ParseError, "cannot write " + f.out_file);
        out << inst.dump(2) << '\n';
    }
    return {{"instance", inst}, {"warnings", r.warnings}, {"periods_per_return", f.period}};
}

json error_json(const Error& e) {
    json j{{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
    if (const auto* ie = dynamic_cast<const InstanceError*>(&e)) {
        j["stock"] = ie->stock();
        if (ie->deviation()) j["deviation"] = *ie->deviation();
    }
    return j;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Worst-, best- and average-case risk profiles for discrete return distributions", "riskprof"};
    app.require_subcommand(1);
    Flags f;

    auto stocks_opt = [&](CLI::App* sub) {
        sub->add_option("--stocks", f.stocks, "Instance JSON")->required();
        sub->add_option("--floor", f.floor, "Smallest allowed nonzero probability");
    };
    auto objective_opt = [&](CLI::App* sub) {
        sub->add_option("--objective", f.objective, "ra_w, ra_b, ra_a, ag_w, ... with optional ** suffix");
    };
    auto sampling_opts = [&](CLI::App* sub) {
        sub->add_option("--eps", f.eps, "Accuracy of the average-case estimate");
        sub->add_option("--delta", f.delta, "Failure probability of the estimate");
        sub->add_option("--seed", f.seed, "RNG seed (RISKPROF_SEED overrides)");
        sub->add_option("--chains", f.chains, "Independent sampler chains");
        sub->add_option("--steps", f.steps, "Walk steps per sample (0 = 64 * dimension)");
    };

    auto* validate = app.add_subcommand("validate", "Check an instance file");
    stocks_opt(validate);

    auto* eval = app.add_subcommand("eval", "Objective value of a two-stock portfolio");
    stocks_opt(eval);
    objective_opt(eval);
    sampling_opts(eval);
    eval->add_option("--alpha", f.alpha, "Return threshold in percent")->required();
    eval->add_option("--x", f.weights, "Portfolio weights, comma separated")->required();
    eval->add_flag("--witness", f.witness, "Emit an extremal joint table");
    eval->add_flag("--oracle", f.oracle)->group("");

    auto* optimize = app.add_subcommand("optimize", "Optimal two-stock portfolio by slope sweep");
    stocks_opt(optimize);
    objective_opt(optimize);
    optimize->add_option("--alpha", f.alpha, "Return threshold in percent")->required();
    optimize->add_option("--plot", f.plot, "Write objective vs. x1 as a gnuplot data file");
    optimize->add_flag("--oracle", f.oracle)->group("");

    auto* eval_k = app.add_subcommand("eval-k", "Objective value of a k-stock portfolio by LP");
    stocks_opt(eval_k);
    objective_opt(eval_k);
    eval_k->add_option("--alpha", f.alpha, "Return threshold in percent")->required();
    eval_k->add_option("--x", f.weights, "Portfolio weights, comma separated")->required();
    eval_k->add_flag("--exact", f.exact, "Full joint-table LP (default)");
    eval_k->add_option("--striping", f.striping, "Striping approximation with this epsilon");
    eval_k->add_option("--cents", f.cents, "Exact evaluation on the 1/C weight lattice");
    eval_k->add_flag("--oracle", f.oracle)->group("");

    auto* optimize_k = app.add_subcommand("optimize-k", "Optimal k-stock portfolio");
    stocks_opt(optimize_k);
    objective_opt(optimize_k);
    optimize_k->add_option("--alpha", f.alpha, "Return threshold in percent")->required();
    optimize_k->add_option("--mode", f.mode, "cents or hyperplanes");
    optimize_k->add_option("--c", f.search_cents, "Unit count of the cent grid");
    optimize_k->add_option("--budget", f.budget, "Cap on candidate portfolios");

    auto* avg = app.add_subcommand("avg", "Average-case estimate by hit-and-run sampling");
    stocks_opt(avg);
    sampling_opts(avg);
    auto* avg_objective = avg->add_option("--objective", f.objective, "ra_a, ag_a or a strict variant");
    avg->add_option("--alpha", f.alpha, "Return threshold in percent")->required();
    avg->add_option("--x", f.weights, "Portfolio weights, comma separated")->required();

    auto* ingest = app.add_subcommand("ingest", "Build an instance from a prices CSV");
    ingest->add_option("--prices", f.prices, "CSV with header date,ticker,price")->required();
    ingest->add_option("--period", f.period, "Observations per return period");
    ingest->add_option("--mu", f.mu, "Grid step in percent");
    ingest->add_option("--m1", f.m1, "Lowest grid level");
    ingest->add_option("--m2", f.m2, "Highest grid level");
    ingest->add_option("--out", f.out_file, "Also write the instance to this file");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << json{{"error", "UsageError"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    }

    const auto start = std::chrono::steady_clock::now();
    try {
        if (avg->parsed() && avg_objective->count() == 0) f.objective = "ra_a";
        const std::uint64_t seed = resolve_seed(f.seed);
        std::string input;
        json results;
        std::string name;
        if (validate->parsed()) {
            name = "validate";
            results = run_validate(f, input);
        } else if (eval->parsed()) {
            name = "eval";
            results = run_eval(f, input, seed);
        } else if (optimize->parsed()) {
            name = "optimize";
            results = run_optimize(f, input);
        } else if (eval_k->parsed()) {
            name = "eval-k";
            results = run_eval_k(f, input);
        } else if (optimize_k->parsed()) {
            name = "optimize-k";
            results = run_optimize_k(f, input);
        } else if (avg->parsed()) {
            name = "avg";
            results = run_avg(f, input, seed);
        } else {
            name = "ingest";
            results = run_ingest(f, input);
        }
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        std::string echo;
        for (const auto& a : args) echo += (echo.empty() ? "" : " ") + a;
        json report{{"command", echo},
                    {"digest", sha256_hex(input)},
                    {"seed", seed},
                    {"results", results},
                    {"timing_ms", ms}};
        out << report.dump(2) << '\n';
        return 0;
    } catch (const Error& e) {
        err << error_json(e).dump() << '\n';
        return is_validation_error(e.code()) ? 2 : 1;
    } catch (const std::exception& e) {
        err << json{{"error", "InternalError"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
}

}  // namespace riskprof
