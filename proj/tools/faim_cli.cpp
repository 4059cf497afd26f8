// Command-line pipeline around the faim library: synthetic data generation,
// COMPAS preprocessing, fitting/applying fair score maps, evaluation reports
// and plot-data export.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 data or
// degeneracy error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "faim/compas.hpp"
#include "faim/dataset.hpp"
#include "faim/metrics.hpp"
#include "faim/model.hpp"
#include "faim/serialize.hpp"
#include "faim/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

// Accepts plain decimals and "p/q" fractions, so grids like 1/9 stay exact
// to the last ulp in configs.
double parse_number(const std::string& text, const std::string& what) {
    try {
        const auto slash = text.find('/');
        std::size_t pos = 0;
        if (slash == std::string::npos) {
            const double v = std::stod(text, &pos);
            if (pos != text.size()) throw std::invalid_argument(text);
            return v;
        }
        const double num = std::stod(text.substr(0, slash), &pos);
        if (pos != slash) throw std::invalid_argument(text);
        const std::string den_text = text.substr(slash + 1);
        const double den = std::stod(den_text, &pos);
        if (pos != den_text.size() || den == 0.0) throw std::invalid_argument(text);
        return num / den;
    } catch (const std::exception&) {
        throw faim::config_error("cannot parse " + what + " value '" + text + "'");
    }
}

std::vector<double> parse_number_list(const std::string& text, std::size_t expected,
                                      const std::string& what) {
    std::vector<double> values;
    std::string item;
    std::stringstream ss(text);
    while (std::getline(ss, item, ',')) values.push_back(parse_number(item, what));
    if (values.size() != expected)
        throw faim::config_error(what + " expects " + std::to_string(expected) +
                                 " comma-separated values");
    return values;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

// Flat key-value theta file with one [group] section per group. The section
// [*] provides a default for groups without their own section.
std::map<std::string, faim::ThetaWeights> load_theta_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw faim::config_error("cannot open theta file '" + path + "'");
    std::map<std::string, faim::ThetaWeights> sections;
    std::map<std::string, int> seen_keys;
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw faim::config_error("theta file line " + std::to_string(line_no) +
                                         ": empty section name");
            sections.emplace(section, faim::ThetaWeights{});
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos || section.empty())
            throw faim::config_error("theta file line " + std::to_string(line_no) +
                                     ": expected 'key = value' inside a [group] section");
        const std::string key = trim(t.substr(0, eq));
        const double value = parse_number(trim(t.substr(eq + 1)), "theta");
        faim::ThetaWeights& theta = sections.at(section);
        if (key == "theta_a")
            theta.a = value;
        else if (key == "theta_b")
            theta.b = value;
        else if (key == "theta_c")
            theta.c = value;
        else
            throw faim::config_error("theta file line " + std::to_string(line_no) +
                                     ": unknown key '" + key + "'");
        seen_keys[section + "\n" + key] += 1;
    }
    for (const auto& [name, theta] : sections) {
        for (const char* key : {"theta_a", "theta_b", "theta_c"})
            if (!seen_keys.count(name + std::string("\n") + key))
                throw faim::config_error("theta file section [" + name + "] is missing " + key);
    }
    return sections;
}

std::map<std::string, faim::ThetaWeights> resolve_thetas(
    const std::vector<std::string>& groups, const std::optional<std::string>& theta_flag,
    const std::optional<std::string>& theta_file) {
    std::optional<faim::ThetaWeights> override_theta;
    if (theta_flag) {
        const auto v = parse_number_list(*theta_flag, 3, "--theta");
        override_theta = faim::ThetaWeights{v[0], v[1], v[2]};
    }
    std::map<std::string, faim::ThetaWeights> sections;
    if (theta_file) sections = load_theta_file(*theta_file);
    if (!override_theta && sections.empty())
        throw faim::config_error("no theta weights given (use --theta or --thetas)");

    std::map<std::string, faim::ThetaWeights> out;
    for (const auto& g : groups) {
        if (override_theta) {
            out.emplace(g, *override_theta); // CLI flag overrides file values
        } else if (auto it = sections.find(g); it != sections.end()) {
            out.emplace(g, it->second);
        } else if (auto def = sections.find("*"); def != sections.end()) {
            out.emplace(g, def->second);
        } else {
            throw faim::config_error("missing theta for group '" + g + "'");
        }
        faim::validate_theta(out.at(g));
    }
    return out;
}

std::string sanitize_for_filename(const std::string& name) {
    std::string out;
    for (char c : name)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return out;
}

void ensure_output_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw faim::config_error("cannot create output directory '" + dir + "'");
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw faim::config_error("cannot write file '" + path.string() + "'");
    return out;
}

void write_map_table(const fs::path& path, const faim::TransportMap& map) {
    auto out = open_output(path);
    out << "raw_score\tfair_score\tdefined\n";
    for (std::size_t i = 0; i < map.grid().bins(); ++i) {
        out << faim::format_double(map.grid().center(i)) << '\t'
            << faim::format_double(map.target(i)) << '\t' << (map.defined(i) ? 1 : 0) << '\n';
    }
}

void write_histogram_table(const fs::path& path, const faim::ScoreHistogram& hist) {
    auto out = open_output(path);
    out << "bin_center\tmass\n";
    for (std::size_t i = 0; i < hist.grid().bins(); ++i)
        out << faim::format_double(hist.grid().center(i)) << '\t'
            << faim::format_double(hist.mass()[i]) << '\n';
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
    std::string output_dir;
    long long n = 100000;
    std::uint64_t seed = 42;
    std::string threshold = "0";
    std::string true_means = "1,-1";
    std::string predicted_means = "2,-3";
    std::string cov = "1,0.8,0.8,1";
};

int cmd_synth(const SynthOptions& opt) {
    faim::SyntheticConfig config;
    config.n = opt.n;
    config.seed = opt.seed;
    config.threshold = parse_number(opt.threshold, "--threshold");
    const auto tm = parse_number_list(opt.true_means, 2, "--true-means");
    const auto pm = parse_number_list(opt.predicted_means, 2, "--predicted-means");
    const auto cv = parse_number_list(opt.cov, 4, "--cov");
    config.true_means = {tm[0], tm[1]};
    config.predicted_means = {pm[0], pm[1]};
    config.covariance = {cv[0], cv[1], cv[2], cv[3]};

    const faim::SyntheticData data = faim::generate_synthetic(config);
    ensure_output_dir(opt.output_dir);
    faim::write_dataset_csv((fs::path(opt.output_dir) / "synthetic.csv").string(), data.dataset);
    faim::write_side_table_csv((fs::path(opt.output_dir) / "synthetic_true_scores.csv").string(),
                               data.side);

    std::map<std::string, std::pair<long long, long long>> counts; // group -> (total, positive)
    for (const auto& r : data.dataset.records) {
        auto& c = counts[r.group];
        ++c.first;
        if (r.positive) ++c.second;
    }
    std::printf("wrote %s and %s\n",
                (fs::path(opt.output_dir) / "synthetic.csv").string().c_str(),
                (fs::path(opt.output_dir) / "synthetic_true_scores.csv").string().c_str());
    for (const auto& [group, c] : counts)
        std::printf("group %s: n=%lld positives=%lld base_rate=%.6f\n", group.c_str(), c.first,
                    c.second, static_cast<double>(c.second) / static_cast<double>(c.first));
    if (counts.size() == 2) {
        const auto a = counts.begin();
        const auto b = std::next(a);
        const auto inc = faim::incompatibility_determinant(a->second.first, a->second.second,
                                                           b->second.first, b->second.second);
        std::printf("base_rate_ratio %s/%s = %.6f\n", a->first.c_str(), b->first.c_str(),
                    inc.base_rate_1 / inc.base_rate_2);
        std::printf("incompatibility_determinant = %s\n",
                    faim::format_double(inc.determinant).c_str());
    }
    std::printf("normalized_threshold = %s\n",
                faim::format_double(data.normalized_threshold).c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// prepare-compas

struct PrepareOptions {
    std::string input;
    std::string output_dir;
    std::string dimension = "sex";
};

int cmd_prepare_compas(const PrepareOptions& opt) {
    const auto dim = faim::parse_compas_dimension(opt.dimension);
    const auto prepared = faim::prepare_compas(opt.input, dim);
    ensure_output_dir(opt.output_dir);
    const fs::path out_path = fs::path(opt.output_dir) / ("compas_" + opt.dimension + ".csv");
    faim::write_dataset_csv(out_path.string(), prepared.dataset);
    std::printf("read %lld rows, skipped %lld, wrote %zu records to %s\n", prepared.rows_read,
                prepared.rows_skipped, prepared.dataset.records.size(), out_path.string().c_str());
    std::map<std::string, long long> sizes;
    for (const auto& r : prepared.dataset.records) ++sizes[r.group];
    for (const auto& [group, n] : sizes) std::printf("group %s: n=%lld\n", group.c_str(), n);
    std::printf("high_risk_threshold = %s\n",
                faim::format_double(faim::compas_high_risk_threshold()).c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// run

struct RunOptions {
    std::string input;
    std::string output_dir;
    std::string stepsize = "0.01";
    std::optional<std::string> theta_flag;
    std::optional<std::string> theta_file;
    bool normalize = false;
    faim::CsvSchema schema{"id", "group", "raw_score", "ground_truth"};
};

int cmd_run(const RunOptions& opt) {
    const faim::ScoreGrid grid(parse_number(opt.stepsize, "--stepsize"));
    faim::GroupedDataset data = faim::load_csv(opt.input, opt.schema);
    const auto thetas = resolve_thetas(data.groups(), opt.theta_flag, opt.theta_file);

    const std::vector<double> snapped = faim::truncate_scores(data.scores(), grid, opt.normalize);
    faim::GroupedDataset fit_data = data;
    for (std::size_t i = 0; i < snapped.size(); ++i) fit_data.records[i].raw_score = snapped[i];

    const faim::FaimModel model = faim::fit(fit_data, grid, thetas);
    const std::vector<double> fair = faim::apply_all(model, fit_data);

    ensure_output_dir(opt.output_dir);
    faim::write_dataset_csv((fs::path(opt.output_dir) / "fair_scores.csv").string(), data, &fair);
    faim::save_model((fs::path(opt.output_dir) / "model.json").string(), model);
    for (const auto& [group, gm] : model.groups)
        write_map_table(fs::path(opt.output_dir) / ("map_" + sanitize_for_filename(group) + ".tsv"),
                        gm.final_map);

    std::printf("fitted %zu groups on %zu records (%zu bins)\n", model.groups.size(),
                data.records.size(), grid.bins());
    for (const auto& [group, gm] : model.groups)
        std::printf("group %s: n=%lld positives=%lld base_rate=%.6f\n", group.c_str(), gm.n_total,
                    gm.n_positive,
                    static_cast<double>(gm.n_positive) / static_cast<double>(gm.n_total));
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
    std::string before_path;
    std::string after_path;
    std::string threshold = "0.5";
    std::string output_dir;
    bool per_score = false;
    std::string stepsize = "0.01";
    faim::CsvSchema schema{"id", "group", "raw_score", "ground_truth"};
};

struct JoinedRecords {
    std::vector<faim::Prediction> before;
    std::vector<faim::Prediction> after;
    std::vector<double> slice_scores; // before-file raw scores
};

JoinedRecords join_on_id(const std::string& before_path, const std::string& after_path,
                         const faim::CsvSchema& schema) {
    const faim::GroupedDataset before = faim::load_csv(before_path, schema);
    // The after file uses its fair_score column when it has one.
    faim::CsvSchema after_schema = schema;
    {
        const faim::csv::Table header_probe = faim::csv::read_file(after_path);
        if (header_probe.has_column("fair_score")) after_schema.score = "fair_score";
    }
    const faim::GroupedDataset after = faim::load_csv(after_path, after_schema);

    std::map<std::string, std::size_t> after_by_id;
    for (std::size_t i = 0; i < after.records.size(); ++i)
        after_by_id.emplace(after.records[i].id, i);
    if (after.records.size() != before.records.size())
        throw faim::data_error("before and after files hold different record counts");

    std::set<std::string> groups_before, groups_after;
    for (const auto& r : before.records) groups_before.insert(r.group);
    for (const auto& r : after.records) groups_after.insert(r.group);
    if (groups_before != groups_after)
        throw faim::data_error("scope mismatch between before and after files");

    JoinedRecords joined;
    joined.before.reserve(before.records.size());
    joined.after.reserve(before.records.size());
    for (const auto& rb : before.records) {
        const auto it = after_by_id.find(rb.id);
        if (it == after_by_id.end())
            throw faim::data_error("id '" + rb.id + "' missing from after file");
        const faim::Record& ra = after.records[it->second];
        if (ra.group != rb.group)
            throw faim::data_error("id '" + rb.id + "' changes group between files");
        if (ra.positive != rb.positive)
            throw faim::data_error("id '" + rb.id + "' changes ground truth between files");
        joined.before.push_back({rb.group, rb.positive, rb.raw_score});
        joined.after.push_back({ra.group, ra.positive, ra.raw_score});
        joined.slice_scores.push_back(rb.raw_score);
    }
    return joined;
}

int cmd_evaluate(const EvaluateOptions& opt) {
    const double threshold = parse_number(opt.threshold, "--threshold");
    const JoinedRecords joined = join_on_id(opt.before_path, opt.after_path, opt.schema);

    const faim::EvaluationReport before = faim::confusion_metrics(joined.before, threshold);
    const faim::EvaluationReport after = faim::confusion_metrics(joined.after, threshold);
    const faim::EvaluationReport with_deltas = faim::delta_report(after, before);

    ensure_output_dir(opt.output_dir);
    open_output(fs::path(opt.output_dir) / "evaluation.csv") << faim::report_to_csv(with_deltas);
    open_output(fs::path(opt.output_dir) / "evaluation_before.csv")
        << faim::report_to_csv(before);
    const std::string text = faim::report_to_text(with_deltas, &before);
    open_output(fs::path(opt.output_dir) / "evaluation.txt") << text;
    std::fputs(text.c_str(), stdout);

    if (opt.per_score) {
        const faim::ScoreGrid grid(parse_number(opt.stepsize, "--stepsize"));
        const auto before_bins =
            faim::per_score_report(joined.before, joined.slice_scores, grid, threshold);
        const auto after_bins =
            faim::per_score_report(joined.after, joined.slice_scores, grid, threshold);
        auto out = open_output(fs::path(opt.output_dir) / "evaluation_per_score.csv");
        out << "bin_center,phase,scope,accuracy,precision,recall,fpr,fnr,"
               "d_accuracy,d_precision,d_recall,d_fpr,d_fnr\n";
        for (std::size_t k = 0; k < before_bins.size(); ++k) {
            const auto& bb = before_bins[k];
            const auto& ab = after_bins[k];
            const faim::EvaluationReport bin_delta = faim::delta_report(ab.report, bb.report);
            auto emit = [&](const char* phase, const faim::EvaluationReport& rep) {
                for (const auto& row : rep.rows) {
                    out << faim::format_double(bb.bin_center) << ',' << phase << ','
                        << faim::csv::escape(row.scope);
                    for (const auto* v : {&row.accuracy, &row.precision, &row.recall, &row.fpr,
                                          &row.fnr})
                        out << ',' << faim::detail::metric_cell(*v);
                    for (const auto* v : {&row.d_accuracy, &row.d_precision, &row.d_recall,
                                          &row.d_fpr, &row.d_fnr})
                        out << ',' << (v->has_value() ? faim::detail::metric_cell(*v) : "");
                    out << '\n';
                }
            };
            emit("before", bb.report);
            emit("after", bin_delta);
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------
// export-plots

struct ExportOptions {
    std::string model_path;
    std::string input;
    std::string output_dir;
    bool normalize = false;
    faim::CsvSchema schema{"id", "group", "raw_score", "ground_truth"};
};

int cmd_export_plots(const ExportOptions& opt) {
    const faim::FaimModel model = faim::load_model(opt.model_path);
    const faim::GroupedDataset data = faim::load_csv(opt.input, opt.schema);
    const std::vector<double> snapped =
        faim::truncate_scores(data.scores(), model.grid, opt.normalize);

    std::map<std::string, std::vector<double>> raw_by_group, fair_by_group;
    std::map<std::string, std::vector<double>> fair_neg_by_group, fair_pos_by_group;
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        const faim::Record& r = data.records[i];
        const double fair = faim::apply(model, r.group, snapped[i]);
        raw_by_group[r.group].push_back(snapped[i]);
        fair_by_group[r.group].push_back(fair);
        (r.positive ? fair_pos_by_group : fair_neg_by_group)[r.group].push_back(fair);
    }

    ensure_output_dir(opt.output_dir);
    for (const auto& [group, gm] : model.groups) {
        const std::string safe = sanitize_for_filename(group);
        write_map_table(fs::path(opt.output_dir) / ("map_" + safe + ".tsv"), gm.final_map);
        if (!raw_by_group.count(group)) continue;
        write_histogram_table(fs::path(opt.output_dir) / ("hist_raw_" + safe + ".tsv"),
                              faim::histogram_from_scores(raw_by_group.at(group), model.grid));
        write_histogram_table(fs::path(opt.output_dir) / ("hist_fair_" + safe + ".tsv"),
                              faim::histogram_from_scores(fair_by_group.at(group), model.grid));
        // Class-conditional fair histograms back the overlap plots.
        if (fair_neg_by_group.count(group))
            write_histogram_table(
                fs::path(opt.output_dir) / ("hist_fair_negative_" + safe + ".tsv"),
                faim::histogram_from_scores(fair_neg_by_group.at(group), model.grid));
        if (fair_pos_by_group.count(group))
            write_histogram_table(
                fs::path(opt.output_dir) / ("hist_fair_positive_" + safe + ".tsv"),
                faim::histogram_from_scores(fair_pos_by_group.at(group), model.grid));
    }
    std::printf("wrote plot tables for %zu groups to %s\n", model.groups.size(),
                opt.output_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fair score interpolation between calibration and error-rate balance"};
    app.require_subcommand(1);

    SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate the two-group synthetic dataset");
    synth_cmd->add_option("--output-dir", synth.output_dir, "output directory")->required();
    synth_cmd->add_option("--n", synth.n, "number of individuals");
    synth_cmd->add_option("--seed", synth.seed, "random seed");
    synth_cmd->add_option("--threshold", synth.threshold, "label threshold on the raw scale");
    synth_cmd->add_option("--true-means", synth.true_means, "per-group true score means a,b");
    synth_cmd->add_option("--predicted-means", synth.predicted_means,
                          "per-group predicted score means a,b");
    synth_cmd->add_option("--cov", synth.cov, "covariance matrix c00,c01,c10,c11");

    PrepareOptions prep;
    auto* prep_cmd =
        app.add_subcommand("prepare-compas", "normalize a Broward County recidivism export");
    prep_cmd->add_option("--input", prep.input, "raw export CSV")->required();
    prep_cmd->add_option("--output-dir", prep.output_dir, "output directory")->required();
    prep_cmd->add_option("--group-dim", prep.dimension, "grouping column: sex, race or age_cat");

    RunOptions run;
    auto* run_cmd = app.add_subcommand("run", "fit the fair score maps and apply them");
    run_cmd->add_option("--input", run.input, "dataset CSV")->required();
    run_cmd->add_option("--output-dir", run.output_dir, "output directory")->required();
    run_cmd->add_option("--stepsize", run.stepsize, "score grid stepsize (accepts p/q)");
    std::string run_theta, run_theta_file;
    run_cmd->add_option("--theta", run_theta, "theta triple a,b,c for every group");
    run_cmd->add_option("--thetas", run_theta_file, "theta config file with [group] sections");
    run_cmd->add_flag("--normalize", run.normalize, "min-max normalize scores before snapping");
    run_cmd->add_option("--id-col", run.schema.id, "id column name");
    run_cmd->add_option("--group-col", run.schema.group, "group column name");
    run_cmd->add_option("--score-col", run.schema.score, "score column name");
    run_cmd->add_option("--label-col", run.schema.label, "ground-truth column name");

    EvaluateOptions eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "before/after metric report with deltas");
    eval_cmd->add_option("--before", eval.before_path, "baseline dataset CSV")->required();
    eval_cmd->add_option("--after", eval.after_path, "post-intervention dataset CSV")->required();
    eval_cmd->add_option("--threshold", eval.threshold, "classification threshold (accepts p/q)")
        ->required();
    eval_cmd->add_option("--output-dir", eval.output_dir, "output directory")->required();
    eval_cmd->add_flag("--per-score", eval.per_score, "also report per score bin");
    eval_cmd->add_option("--stepsize", eval.stepsize, "per-score bin width (accepts p/q)");
    eval_cmd->add_option("--id-col", eval.schema.id, "id column name");
    eval_cmd->add_option("--group-col", eval.schema.group, "group column name");
    eval_cmd->add_option("--score-col", eval.schema.score, "score column name");
    eval_cmd->add_option("--label-col", eval.schema.label, "ground-truth column name");

    ExportOptions exp;
    auto* exp_cmd = app.add_subcommand("export-plots", "dump histograms and transport maps");
    exp_cmd->add_option("--model", exp.model_path, "model.json from a run")->required();
    exp_cmd->add_option("--input", exp.input, "dataset CSV")->required();
    exp_cmd->add_option("--output-dir", exp.output_dir, "output directory")->required();
    exp_cmd->add_flag("--normalize", exp.normalize, "min-max normalize scores before snapping");
    exp_cmd->add_option("--id-col", exp.schema.id, "id column name");
    exp_cmd->add_option("--group-col", exp.schema.group, "group column name");
    exp_cmd->add_option("--score-col", exp.schema.score, "score column name");
    exp_cmd->add_option("--label-col", exp.schema.label, "ground-truth column name");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth);
        if (prep_cmd->parsed()) return cmd_prepare_compas(prep);
        if (run_cmd->parsed()) {
            if (!run_theta.empty()) run.theta_flag = run_theta;
            if (!run_theta_file.empty()) run.theta_file = run_theta_file;
            return cmd_run(run);
        }
        if (eval_cmd->parsed()) return cmd_evaluate(eval);
        if (exp_cmd->parsed()) return cmd_export_plots(exp);
    } catch (const faim::config_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const faim::data_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
