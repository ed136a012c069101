#include "spurdec/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "spurdec/decompose.hpp"
#include "spurdec/diagram.hpp"
#include "spurdec/estimate.hpp"
#include "spurdec/model.hpp"
#include "spurdec/rng.hpp"

namespace spurdec {

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 14695981039346656037ull;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::string hash_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open file for hashing: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
    return out;
}

namespace {

using ordered_json = nlohmann::ordered_json;

std::pair<std::string, std::string> parse_binding(const std::string& text, const char* flag) {
    auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
        throw std::invalid_argument(std::string(flag) + " expects VAR=VALUE, got '" + text + "'");
    }
    return {text.substr(0, eq), text.substr(eq + 1)};
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            if (!cur.empty()) {
                out.push_back(cur);
            }
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (!cur.empty()) {
        out.push_back(cur);
    }
    return out;
}

std::uint64_t resolve_seed(bool seed_given, std::uint64_t seed_flag) {
    if (seed_given) {
        return seed_flag;
    }
    if (const char* env = std::getenv(kSeedEnvVar)) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0' && *env != '\0') {
            return v;
        }
        throw std::invalid_argument(std::string(kSeedEnvVar) + " is set but is not an unsigned "
                                                               "integer: '" +
                                    env + "'");
    }
    return 0;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string join(const std::vector<std::string>& names, const char* sep = ", ") {
    std::string out;
    for (const auto& n : names) {
        if (!out.empty()) {
            out += sep;
        }
        out += n;
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open output file: " + path);
    }
    out << content;
    if (!out) {
        throw std::runtime_error("failed while writing: " + path);
    }
}

ordered_json report_header(const char* command) {
    ordered_json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["command"] = command;
    j["inputs"] = ordered_json::object();
    return j;
}

void add_input(ordered_json& report, const char* label, const std::string& path) {
    report["inputs"][label] = ordered_json{{"path", path}, {"fnv1a64", hash_file_hex(path)}};
}

ordered_json query_json(const Assignment& x, const OutcomeQuery& y) {
    ordered_json q;
    q["treatment"] = ordered_json::object();
    for (const auto& [k, v] : x) {
        q["treatment"][k] = v;
    }
    q["outcome"]["variable"] = y.variable;
    q["outcome"]["form"] = y.value ? "probability" : "expectation";
    if (y.value) {
        q["outcome"]["value"] = *y.value;
    }
    return q;
}

std::string describe_outcome(const OutcomeQuery& y) {
    return y.value ? "P(" + y.variable + "=" + *y.value + " | ...)" : "E[" + y.variable + " | ...]";
}

// Option holders for all subcommands.
struct Options {
    // decompose
    std::string dec_model, dec_x, dec_y, dec_yexp, dec_order, dec_mode = "auto", dec_out;
    bool dec_force_model_only = false;
    // estimate
    std::string est_data, est_schema, est_diagram, est_x, est_y, est_yexp, est_order,
        est_mode = "auto", est_out, est_csv;
    std::uint64_t est_replicates = 1000;
    double est_level = 0.95;
    std::uint64_t est_seed = 0;
    double est_smoothing = 0.0;
    bool est_force_formula = false;
    // check-id
    std::string chk_model, chk_x = "X", chk_y = "Y", chk_uset, chk_out;
    // sample
    std::string smp_model, smp_out, smp_schema_out;
    std::uint64_t smp_n = 0;
    std::uint64_t smp_seed = 0;
};

OutcomeQuery make_outcome(const std::string& y_event, const std::string& y_expect) {
    if (y_event.empty() == y_expect.empty()) {
        throw std::invalid_argument("exactly one of --y VAR=VALUE / --y-expect VAR is required");
    }
    if (!y_event.empty()) {
        auto [var, val] = parse_binding(y_event, "--y");
        return OutcomeQuery::event(var, val);
    }
    return OutcomeQuery::expectation(y_expect);
}

std::optional<std::vector<std::string>> make_order(const CLI::App* cmd, const std::string& text) {
    if (!cmd->count("--order")) {
        return std::nullopt;
    }
    return split_list(text);
}

void decomposition_to_json(ordered_json& j, const DecompositionReport& rep) {
    j["mode"] = rep.mode;
    j["ordering"] = rep.ordering;
    j["baseline"] = rep.baseline;
    j["endpoint"] = rep.endpoint;
    j["total"] = rep.total;
    j["contributions"] = ordered_json::array();
    for (const auto& c : rep.contributions) {
        j["contributions"].push_back(ordered_json{{"label", c.label}, {"value", c.value}});
    }
    j["residual"] = rep.residual;
}

std::string decomposition_text(const DecompositionReport& rep) {
    std::ostringstream out;
    out << "mode: " << rep.mode << "\n";
    out << "ordering: " << (rep.ordering.empty() ? "(none)" : join(rep.ordering)) << "\n";
    out << "baseline (observed):        " << fmt(rep.baseline) << "\n";
    out << "endpoint (interventional):  " << fmt(rep.endpoint) << "\n";
    out << "total spurious effect:      " << fmt(rep.total) << "\n";
    out << "contributions:\n";
    for (const auto& c : rep.contributions) {
        out << "  " << c.label << ": " << fmt(c.value) << "\n";
    }
    out << "residual: " << fmt(rep.residual) << "\n";
    return out.str();
}

CliResult run_decompose(const CLI::App* cmd, const Options& o) {
    CliResult result;
    Scm scm = load_model(o.dec_model);
    auto [xvar, xval] = parse_binding(o.dec_x, "--x");
    Assignment x{{xvar, xval}};
    OutcomeQuery y = make_outcome(o.dec_y, o.dec_yexp);
    auto order = make_order(cmd, o.dec_order);

    std::string mode = o.dec_mode;
    if (mode == "auto") {
        mode = is_markovian(project(scm)) ? "markovian" : "semi-markovian";
    }
    DecompositionReport rep;
    if (mode == "markovian") {
        rep = markov_decompose(scm, x, y, order, o.dec_force_model_only);
    } else if (mode == "semi-markovian") {
        if (o.dec_force_model_only) {
            throw std::invalid_argument("--force-model-only only applies to the markovian mode");
        }
        rep = semimarkov_decompose(scm, x, y, order);
    } else {
        throw std::invalid_argument("--mode must be 'markovian', 'semi-markovian' or 'auto'");
    }

    ordered_json j = report_header("decompose");
    add_input(j, "model", o.dec_model);
    j["query"] = query_json(x, y);
    decomposition_to_json(j, rep);
    result.report = std::move(j);
    if (!o.dec_out.empty()) {
        write_text_file(o.dec_out, result.report.dump(2) + "\n");
        result.text = "decompose " + describe_outcome(y) + " under " + xvar + "=" + xval + "\n" +
                      decomposition_text(rep) + "report written to " + o.dec_out + "\n";
    }
    return result;
}

CliResult run_estimate(const CLI::App* cmd, const Options& o) {
    CliResult result;
    Dataset data = load_dataset_csv(o.est_data, o.est_schema);
    CausalDiagram d = load_diagram(o.est_diagram);
    auto [xvar, xval] = parse_binding(o.est_x, "--x");
    Assignment x{{xvar, xval}};
    OutcomeQuery y = make_outcome(o.est_y, o.est_yexp);
    auto order = make_order(cmd, o.est_order);
    std::uint64_t seed = resolve_seed(cmd->count("--seed") > 0, o.est_seed);

    // Point decomposition first: surfaces identifiability refusals and
    // configuration errors before any resampling work.
    DecompositionReport point_rep = estimate_decomposition(
        table_from_dataset(data), d, x, y, o.est_mode, order, o.est_smoothing,
        o.est_force_formula);

    auto estimator = [&](const Dataset& sample) {
        DecompositionReport rep =
            estimate_decomposition(table_from_dataset(sample), d, x, y, o.est_mode, order,
                                   o.est_smoothing, o.est_force_formula);
        std::vector<double> components{rep.total};
        for (const auto& c : rep.contributions) {
            components.push_back(c.value);
        }
        return components;
    };
    std::vector<EstimateWithCi> cis =
        bootstrap_ci_vector(data, estimator, o.est_replicates, o.est_level, seed);

    ordered_json j = report_header("estimate");
    add_input(j, "data", o.est_data);
    add_input(j, "schema", o.est_schema);
    add_input(j, "diagram", o.est_diagram);
    j["query"] = query_json(x, y);
    j["mode"] = point_rep.mode;
    j["ordering"] = point_rep.ordering;
    j["n"] = data.n;
    j["replicates"] =
        ordered_json{{"requested", o.est_replicates},
                     {"used", cis[0].replicates},
                     {"failed", cis[0].failed_replicates}};
    j["level"] = o.est_level;
    j["seed"] = seed;
    j["smoothing"] = o.est_smoothing;
    j["force_formula"] = o.est_force_formula;
    j["baseline"] = point_rep.baseline;
    j["endpoint"] = point_rep.endpoint;
    auto ci_json = [](const EstimateWithCi& e) {
        return ordered_json{{"point", e.point},
                            {"lower", e.lower},
                            {"upper", e.upper},
                            {"point_in_interval", e.point_in_interval}};
    };
    j["total"] = ci_json(cis[0]);
    j["contributions"] = ordered_json::array();
    for (std::size_t i = 0; i < point_rep.contributions.size(); ++i) {
        ordered_json entry;
        entry["label"] = point_rep.contributions[i].label;
        entry.update(ci_json(cis[i + 1]));
        j["contributions"].push_back(std::move(entry));
    }
    j["residual"] = point_rep.residual;
    result.report = std::move(j);

    if (!o.est_csv.empty()) {
        std::ostringstream csv;
        csv << "label,point,lower,upper\n";
        char buf[96];
        auto row = [&](const std::string& label, const EstimateWithCi& e) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g", e.point, e.lower, e.upper);
            csv << label << "," << buf << "\n";
        };
        row("total", cis[0]);
        for (std::size_t i = 0; i < point_rep.contributions.size(); ++i) {
            row(point_rep.contributions[i].label, cis[i + 1]);
        }
        write_text_file(o.est_csv, csv.str());
    }
    if (!o.est_out.empty()) {
        write_text_file(o.est_out, result.report.dump(2) + "\n");
        std::ostringstream text;
        text << "estimate " << describe_outcome(y) << " under " << xvar << "=" << xval
             << " from n=" << data.n << " rows\n";
        text << "mode: " << point_rep.mode << ", ordering: " << join(point_rep.ordering)
             << "\n";
        text << "total: " << fmt(cis[0].point) << "  [" << fmt(cis[0].lower) << ", "
             << fmt(cis[0].upper) << "]\n";
        for (std::size_t i = 0; i < point_rep.contributions.size(); ++i) {
            const auto& e = cis[i + 1];
            text << "  " << point_rep.contributions[i].label << ": " << fmt(e.point) << "  ["
                 << fmt(e.lower) << ", " << fmt(e.upper) << "]\n";
        }
        text << "(B=" << cis[0].replicates << " used, " << cis[0].failed_replicates
             << " failed, level " << fmt(o.est_level) << ", seed " << seed << ")\n";
        text << "report written to " << o.est_out << "\n";
        result.text = text.str();
    }
    return result;
}

CliResult run_check_id(const Options& o) {
    CliResult result;
    CausalDiagram d = load_diagram(o.chk_model);
    auto uset_list = split_list(o.chk_uset);
    NameSet u_set(uset_list.begin(), uset_list.end());

    IdVerdict verdict = check_identifiable(d, u_set, o.chk_x, o.chk_y);
    auto tops = tops_of_spurious_treks(d, o.chk_x, o.chk_y);
    auto anchors = anchor_set(d, u_set, o.chk_x);
    AseacResult aseac = check_aseac(d, u_set, o.chk_x, o.chk_y);

    auto failed_with = [&](const char* prefix) {
        for (const auto& r : verdict.reasons) {
            if (r.rfind(prefix, 0) == 0) {
                return true;
            }
        }
        return false;
    };

    ordered_json j = report_header("check-id");
    add_input(j, "diagram", o.chk_model);
    j["x"] = o.chk_x;
    j["y"] = o.chk_y;
    j["u_set"] = std::vector<std::string>(u_set.begin(), u_set.end());
    j["ustot"] = tops;
    j["anchor_set"] = std::vector<std::string>(anchors.begin(), anchors.end());
    j["markovian"] = is_markovian(d);
    j["conditions"] = ordered_json::array();
    auto cond = [&](const char* name, bool holds) {
        j["conditions"].push_back(ordered_json{{"name", name}, {"holds", holds}});
    };
    cond("outcome-not-in-anchor-set", !failed_with("outcome-in-anchor-set:"));
    {
        ordered_json c{{"name", "anchor-exogenous-ancestral-closure"}, {"holds", aseac.holds}};
        if (!aseac.holds) {
            c["witnesses"] = aseac.witnesses;
        }
        j["conditions"].push_back(std::move(c));
    }
    cond("outcome-separated-given-treatment-and-anchors", !failed_with("outcome-dependence:"));
    cond("anchor-set-unaffected-by-treatment", !failed_with("anchor-treatment-dependence:"));
    j["verdict"] = verdict.verdict();
    j["reasons"] = verdict.reasons;
    result.report = std::move(j);
    result.exit_code = verdict.identifiable ? 0 : 2;

    if (!o.chk_out.empty()) {
        write_text_file(o.chk_out, result.report.dump(2) + "\n");
        std::ostringstream text;
        text << "verdict: " << verdict.verdict() << "\n";
        text << "u_set: {" << join(j["u_set"].get<std::vector<std::string>>()) << "}  anchor: {"
             << join(j["anchor_set"].get<std::vector<std::string>>()) << "}  tops: {"
             << join(tops) << "}\n";
        for (const auto& c : j["conditions"]) {
            text << (c["holds"].get<bool>() ? "  [pass] " : "  [FAIL] ")
                 << c["name"].get<std::string>() << "\n";
        }
        for (const auto& r : verdict.reasons) {
            text << "  - " << r << "\n";
        }
        text << "report written to " << o.chk_out << "\n";
        result.text = text.str();
    }
    return result;
}

CliResult run_sample(const CLI::App* cmd, const Options& o) {
    CliResult result;
    Scm scm = load_model(o.smp_model);
    std::uint64_t seed = resolve_seed(cmd->count("--seed") > 0, o.smp_seed);
    Dataset data = sample_dataset(scm, o.smp_n, seed);
    write_dataset_csv(data, o.smp_out);

    ordered_json j = report_header("sample");
    add_input(j, "model", o.smp_model);
    j["n"] = data.n;
    j["seed"] = seed;
    j["columns"] = ordered_json::array();
    for (const auto& c : data.columns) {
        j["columns"].push_back(c.name);
    }
    j["out"] = o.smp_out;
    if (!o.smp_schema_out.empty()) {
        ordered_json schema;
        schema["columns"] = ordered_json::object();
        schema["numeric"] = ordered_json::object();
        for (const auto& c : data.columns) {
            schema["columns"][c.name] = c.domain;
            if (c.has_numeric) {
                ordered_json enc = ordered_json::object();
                for (std::size_t i = 0; i < c.domain.size(); ++i) {
                    enc[c.domain[i]] = c.numeric[i];
                }
                schema["numeric"][c.name] = std::move(enc);
            }
        }
        write_text_file(o.smp_schema_out, schema.dump(2) + "\n");
        j["schema_out"] = o.smp_schema_out;
    }
    result.report = std::move(j);
    return result;
}

}  // namespace

CliResult run_cli(const std::vector<std::string>& args) {
    CliResult result;
    Options o;

    CLI::App app{"decomposition of spurious variations in discrete structural causal models"};
    app.name(kToolName);
    app.require_subcommand(1);

    CLI::App* dec = app.add_subcommand(
        "decompose", "exact per-latent decomposition of the spurious effect in an SCM");
    dec->add_option("--model", o.dec_model, "SCM JSON file")->required();
    dec->add_option("--x", o.dec_x, "treatment assignment VAR=VALUE")->required();
    dec->add_option("--y", o.dec_y, "outcome event VAR=VALUE");
    dec->add_option("--y-expect", o.dec_yexp, "outcome variable, expectation form");
    dec->add_option("--order", o.dec_order, "comma-separated latent (or confounder) order");
    dec->add_option("--mode", o.dec_mode, "markovian | semi-markovian | auto (default)");
    dec->add_flag("--force-model-only", o.dec_force_model_only,
                  "allow non-topological confounder orders (model quantities only; such "
                  "prefix values are not identifiable from data)");
    dec->add_option("--out", o.dec_out, "write the JSON report to this file");

    CLI::App* est = app.add_subcommand(
        "estimate", "estimate the decomposition from a dataset, with bootstrap intervals");
    est->add_option("--data", o.est_data, "dataset CSV with header row")->required();
    est->add_option("--schema", o.est_schema, "sidecar schema JSON for the CSV")->required();
    est->add_option("--diagram,--model", o.est_diagram,
                    "diagram JSON (or a full model file, projected)")
        ->required();
    est->add_option("--x", o.est_x, "treatment assignment VAR=VALUE")->required();
    est->add_option("--y", o.est_y, "outcome event VAR=VALUE");
    est->add_option("--y-expect", o.est_yexp, "outcome variable, expectation form");
    est->add_option("--order", o.est_order, "comma-separated latent (or confounder) order");
    est->add_option("--mode", o.est_mode, "markovian | semi-markovian | auto (default)");
    est->add_option("--replicates", o.est_replicates, "bootstrap replicates (default 1000)");
    est->add_option("--level", o.est_level, "confidence level (default 0.95)");
    est->add_option("--seed", o.est_seed,
                    "RNG seed (default: $" + std::string(kSeedEnvVar) + " or 0)");
    est->add_option("--smoothing", o.est_smoothing,
                    "additive smoothing for empty strata (default 0 = hard error)");
    est->add_flag("--force-formula", o.est_force_formula,
                  "compute the anchor adjustment even when identifiability is not established");
    est->add_option("--out", o.est_out, "write the JSON report to this file");
    est->add_option("--csv", o.est_csv, "write contributions and intervals as CSV");

    CLI::App* chk = app.add_subcommand(
        "check-id", "check the identification conditions for a latent subset");
    chk->add_option("--model,--diagram", o.chk_model,
                    "diagram JSON (or a full model file, projected)")
        ->required();
    chk->add_option("--x", o.chk_x, "treatment variable (default X)");
    chk->add_option("--y", o.chk_y, "outcome variable (default Y)");
    chk->add_option("--uset", o.chk_uset, "comma-separated latent subset (default empty)");
    chk->add_option("--out", o.chk_out, "write the JSON report to this file");

    CLI::App* smp =
        app.add_subcommand("sample", "forward-sample observations from an SCM to CSV");
    smp->add_option("--model", o.smp_model, "SCM JSON file")->required();
    smp->add_option("--n", o.smp_n, "number of rows")->required();
    smp->add_option("--seed", o.smp_seed,
                    "RNG seed (default: $" + std::string(kSeedEnvVar) + " or 0)");
    smp->add_option("--out", o.smp_out, "output CSV path")->required();
    smp->add_option("--schema-out", o.smp_schema_out,
                    "also write a schema JSON usable with 'estimate'");

    std::vector<const char*> argv;
    argv.push_back(kToolName);
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            result.exit_code = 0;
            result.text = app.help();
            return result;
        }
        result.exit_code = 1;
        result.report = ordered_json{{"error", std::string("argument error: ") + e.what()}};
        return result;
    }

    try {
        if (dec->parsed()) {
            result = run_decompose(dec, o);
        } else if (est->parsed()) {
            result = run_estimate(est, o);
        } else if (chk->parsed()) {
            result = run_check_id(o);
        } else if (smp->parsed()) {
            result = run_sample(smp, o);
        }
    } catch (const NotIdentifiedError& e) {
        result = CliResult{};
        result.exit_code = 2;
        result.report = ordered_json{{"error", e.what()}, {"reasons", e.reasons()}};
    } catch (const std::exception& e) {
        result = CliResult{};
        result.exit_code = 1;
        result.report = ordered_json{{"error", e.what()}};
    }
    return result;
}

int run_cli_main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) {
        args.emplace_back(argv[i]);
    }
    CliResult r = run_cli(args);
    if (!r.text.empty()) {
        std::fputs(r.text.c_str(), stdout);
    } else if (!r.report.is_null()) {
        std::string dumped = r.report.dump(2) + "\n";
        std::fputs(dumped.c_str(), stdout);
    }
    return r.exit_code;
}

}  // namespace spurdec
