#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "stratarank/csv.hpp"
#include "stratarank/diagnostics.hpp"
#include "stratarank/metrics.hpp"
#include "stratarank/parse.hpp"
#include "stratarank/search.hpp"
#include "stratarank/simulate.hpp"
#include "stratarank/threads.hpp"

namespace {

using namespace stratarank;

constexpr int kExitDeficit = 1;
constexpr int kExitSyntax = 2;
constexpr int kExitSemantic = 3;
constexpr int kExitGrayZone = 4;

struct Output {
    std::string path;  // empty = stdout
    void write(const std::string& text) const {
        if (path.empty()) {
            std::cout << text;
            return;
        }
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << text;
    }
};

std::string versioned(const std::string& body) {
    return "stratarank-report v1\n" + body;
}

std::map<std::string, double> parse_vc_arg(const std::string& text) {
    std::map<std::string, double> vc;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        const auto eq = cur.find('=');
        if (eq == std::string::npos)
            throw SemanticError("--vc needs name=value pairs");
        vc[cur.substr(0, eq)] = std::stod(cur.substr(eq + 1));
        cur.clear();
    };
    for (char c : text) {
        if (c == ',') flush();
        else if (c != ' ') cur += c;
    }
    flush();
    return vc;
}

int run(int argc, char** argv) {
    CLI::App app{"exact degrees-of-freedom partition for multi-stratum designs"};
    app.require_subcommand(1);
    app.fallthrough();  // --format/--output/--threads are valid after subcommands

    std::string format = "pretty";
    std::string output_path;
    int threads = 0;
    app.add_option("--format", format, "csv | text | pretty")
        ->check(CLI::IsMember({"csv", "text", "pretty"}));
    app.add_option("--output,-o", output_path, "write the report here (default stdout)");
    app.add_option("--threads", threads,
                   "worker threads (0 = STRATARANK_THREADS or OpenMP default)");

    std::string design_path, weights_arg, vc_arg, scenario_path;
    bool allow_deficit = false;
    std::uint64_t seed = 1;

    auto* analyze = app.add_subcommand("analyze", "df partition table of a design");
    analyze->add_option("design", design_path)->required();
    analyze->add_flag("--allow-deficit", allow_deficit,
                      "exit 0 even when df are absorbed by blocking");

    auto* metrics_cmd = app.add_subcommand("metrics", "rho/delta/alpha, ALI, resolution");
    std::string weights_file;
    metrics_cmd->add_option("design", design_path)->required();
    metrics_cmd->add_option("--weights", weights_arg,
                            "effect weights, e.g. main=1 or A=0.5,AB=0.5");
    metrics_cmd->add_option("--weights-file", weights_file,
                            "file with one NAME=value weight per line");
    metrics_cmd->add_option("--vc", vc_arg,
                            "variance components for alpha, e.g. block=2,residual=1");

    auto* diagnose = app.add_subcommand("diagnose", "pre-experiment screening");
    diagnose->add_option("design", design_path)->required();
    double sparse_threshold = 0.15;
    diagnose->add_option("--sparse-threshold", sparse_threshold,
                         "sparse-unit warning threshold");

    auto* validate = app.add_subcommand("validate",
                                        "projector and identity audits plus checklist");
    validate->add_option("design", design_path)->required();

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo scenario runner");
    simulate->add_option("scenario", scenario_path)->required();
    long reps_override = 0;
    bool seed_given = false;
    simulate->add_option("--reps", reps_override, "override scenario n_reps");
    simulate->add_option("--seed", seed, "override scenario seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* search_cmd = app.add_subcommand("search", "defining-word / block search");
    int k = 5, p = 1;
    long run_budget = 1024;
    std::string block_stratum;
    std::string winner_path;
    search_cmd->add_option("--k", k, "factor count")->required();
    search_cmd->add_option("--p", p, "number of defining words")->required();
    search_cmd->add_option("--weights", weights_arg, "e.g. main=1")->required();
    search_cmd->add_option("--block-stratum", block_stratum,
                           "search block words for this stratum too");
    search_cmd->add_option("--run-budget", run_budget);
    search_cmd->add_option("--winner", winner_path, "write the winning design file");

    auto* bench = app.add_subcommand("bench", "projector vs bootstrap timing");
    std::string n_arg = "1000,10000,100000";
    int bootstrap_draws = 100, repeats = 30;
    bench->add_option("--n", n_arg, "comma-separated sizes");
    bench->add_option("--bootstrap-draws", bootstrap_draws);
    bench->add_option("--repeats", repeats);
    bench->add_option("--seed", seed);

    CLI11_PARSE(app, argc, argv);
    const Output out{output_path};

    if (*analyze) {
        const DesignSpec spec = load_design_file(design_path);
        const DfTable table = partition_table(spec, {}, threads);
        if (format == "csv") out.write(table.to_csv());
        else if (format == "text") out.write(versioned(table.pretty()));
        else out.write(table.pretty());
        if (table.any_gray_zone) {
            std::cerr << "warning: singular values near the rank tolerance\n";
            return kExitGrayZone;
        }
        if (table.deficit != 0 && !allow_deficit) return kExitDeficit;
        return 0;
    }
    if (*metrics_cmd) {
        const DesignSpec spec = load_design_file(design_path);
        const DfTable table = partition_table(spec, {}, threads);
        std::map<Word, double> weights;
        const std::map<Word, double>* wptr = nullptr;
        if (!weights_file.empty()) {
            std::ifstream in(weights_file);
            if (!in) throw std::runtime_error("cannot open " + weights_file);
            std::string item, joined;
            while (std::getline(in, item)) {
                if (item.empty() || item[0] == '#') continue;
                if (!joined.empty()) joined += ',';
                joined += item;
            }
            weights_arg = joined;
        }
        if (!weights_arg.empty()) {
            weights = parse_weights(weights_arg, spec.n_factors());
            wptr = &weights;
        }
        VarianceComponents vc;
        const VarianceComponents* vcptr = nullptr;
        if (!vc_arg.empty()) {
            for (const auto& [name, v] : parse_vc_arg(vc_arg)) {
                if (name == "residual") vc.residual = v;
                else vc.sigma2[name] = v;
            }
            vcptr = &vc;
        }
        const RetentionReport report = retention_report(spec, table, wptr, vcptr);
        if (format == "csv") out.write(report.to_csv());
        else if (format == "text") out.write(versioned(report.pretty()));
        else out.write(report.pretty());
        return 0;
    }
    if (*diagnose) {
        const DesignSpec spec = load_design_file(design_path);
        const DiagnosticReport report = checklist(spec, sparse_threshold);
        if (format == "csv") out.write(report.to_csv());
        else out.write(format == "text" ? versioned(report.to_text()) : report.to_text());
        return 0;
    }
    if (*validate) {
        const DesignSpec spec = load_design_file(design_path);
        const OrthoAudit audit = check_orthogonal_decomposition(spec);
        std::ostringstream body;
        body << "projector audit: sum_to_identity="
             << (audit.sum_to_identity ? "true" : "false")
             << " pairwise_orthogonal=" << (audit.pairwise_orthogonal ? "true" : "false")
             << " max_violation=" << audit.max_violation << '\n';
        bool ok = audit.sum_to_identity && audit.pairwise_orthogonal;
        try {
            const DfTable table = partition_table(spec, {}, threads);
            const DeficitReport rep = verify_identity(spec, table);
            body << "identity audit: total=" << table.total
                 << " deficit=" << rep.deficit
                 << " spectral_total=" << rep.spectral_total
                 << " spectral_ok=" << (rep.spectral_ok ? "true" : "false") << '\n';
            for (const auto& row : rep.per_stratum)
                body << "  " << row.stratum << ": dim=" << row.dim
                     << " allocated=" << row.allocated << " residual=" << row.residual
                     << " absorbed=" << row.absorbed << '\n';
            ok = ok && rep.spectral_ok;
        } catch (const NumericError& err) {
            body << "identity audit failed: " << err.what() << '\n';
            ok = false;
        }
        body << checklist(spec).to_text();
        out.write(format == "text" ? versioned(body.str()) : body.str());
        return ok ? 0 : kExitDeficit;
    }
    if (*simulate) {
        std::ifstream in(scenario_path);
        if (!in) throw std::runtime_error("cannot open scenario " + scenario_path);
        std::ostringstream buf;
        buf << in.rdbuf();
        const auto slash = scenario_path.find_last_of('/');
        Scenario sc = parse_scenario(
            buf.str(), slash == std::string::npos ? "" : scenario_path.substr(0, slash));
        if (reps_override > 0) sc.config.n_reps = sc.config_b.n_reps = reps_override;
        if (seed_given) sc.config.master_seed = sc.config_b.master_seed = seed;
        sc.config.threads = sc.config_b.threads = threads;
        std::string body;
        if (sc.kind == Scenario::Kind::split_plot)
            body = simulate_split_plot(sc.config).to_csv();
        else if (sc.kind == Scenario::Kind::nested)
            body = simulate_nested(sc.config).to_csv();
        else
            body = simulate_power_study(sc.config, sc.config_b).to_csv();
        out.write(format == "text" ? versioned(body) : body);
        return 0;
    }
    if (*search_cmd) {
        SearchSpace space;
        space.k = k;
        space.p = p;
        space.run_budget = run_budget;
        space.with_blocks = !block_stratum.empty();
        if (!block_stratum.empty()) space.block_stratum = block_stratum;
        const std::map<Word, double> weights = parse_weights(weights_arg, k);
        const SearchResult result = search(space, weights, threads);
        if (!winner_path.empty()) {
            std::ofstream w(winner_path, std::ios::binary);
            if (!w) throw std::runtime_error("cannot write " + winner_path);
            w << serialize_design(result.best);
        }
        std::ostringstream body;
        body << result.ranked_csv();
        body << "objective," << fmt_double(result.objective) << ",,,\n";
        out.write(format == "text" ? versioned(body.str()) : body.str());
        return 0;
    }
    if (*bench) {
        std::vector<std::int64_t> ns;
        std::string cur;
        for (char c : n_arg + ",") {
            if (c == ',') {
                if (!cur.empty()) ns.push_back(std::stoll(cur));
                cur.clear();
            } else {
                cur += c;
            }
        }
        const BenchResult result = benchmark(ns, bootstrap_draws, repeats, threads);
        out.write(result.to_csv());
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ParseError& err) {
        std::cerr << "syntax error: " << err.what() << '\n';
        return kExitSyntax;
    } catch (const SemanticError& err) {
        std::cerr << "semantic error: " << err.what() << '\n';
        return kExitSemantic;
    } catch (const NumericError& err) {
        std::cerr << "numeric error: " << err.what() << '\n';
        return kExitGrayZone;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kExitSemantic;
    }
}
