#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hja/data.hpp"
#include "hja/decomposition.hpp"
#include "hja/errors.hpp"
#include "hja/evaluation.hpp"
#include "hja/inference.hpp"
#include "hja/likelihood.hpp"
#include "hja/model_selection.hpp"
#include "hja/rng.hpp"
#include "hja/simulation.hpp"
#include "hja/solver.hpp"

namespace {

using ordered_json = nlohmann::ordered_json;

int classify_exit(const std::exception& e) {
    if (dynamic_cast<const hja::ValidationError*>(&e) != nullptr ||
        dynamic_cast<const hja::FormatError*>(&e) != nullptr ||
        dynamic_cast<const hja::IoError*>(&e) != nullptr ||
        dynamic_cast<const hja::RankTooLarge*>(&e) != nullptr ||
        dynamic_cast<const hja::ConnectivityError*>(&e) != nullptr) {
        return 2;
    }
    if (dynamic_cast<const hja::SolverStalled*>(&e) != nullptr ||
        dynamic_cast<const hja::SingularInformation*>(&e) != nullptr ||
        dynamic_cast<const hja::ChartError*>(&e) != nullptr ||
        dynamic_cast<const hja::DegenerateConsensus*>(&e) != nullptr ||
        dynamic_cast<const hja::SelectionError*>(&e) != nullptr ||
        dynamic_cast<const hja::InsufficientNearTiePairs*>(&e) != nullptr) {
        return 3;
    }
    return 1;
}

ordered_json vector_json(const Eigen::VectorXd& v) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

ordered_json matrix_json(const Eigen::MatrixXd& m) {
    ordered_json data = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    }
    return ordered_json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

ordered_json id_map_json(const hja::IdMap& ids) {
    return ordered_json{{"judges", ids.judges}, {"items", ids.items}};
}

ordered_json params_json(const hja::HjaParams& params) {
    return ordered_json{{"rank", params.rank()},
                        {"gamma", vector_json(params.gamma)},
                        {"mu", vector_json(params.mu)},
                        {"u", matrix_json(params.u)},
                        {"v", matrix_json(params.v)}};
}

ordered_json constraints_json(const hja::ConstraintReport& report) {
    ordered_json entries = ordered_json::array();
    for (const auto& entry : report.entries) {
        entries.push_back(
            ordered_json{{"name", entry.name}, {"residual", entry.residual}, {"pass", entry.pass}});
    }
    return ordered_json{{"pass", report.pass}, {"tol", report.tol}, {"entries", std::move(entries)}};
}

ordered_json graph_json(const hja::GraphReport& report, const hja::IdMap& ids) {
    ordered_json per_judge = ordered_json::array();
    for (std::size_t k = 0; k < report.per_judge_connected.size(); ++k) {
        per_judge.push_back(static_cast<bool>(report.per_judge_connected[k]));
    }
    ordered_json out{{"pooled_connected", report.pooled_connected}, {"per_judge_connected", per_judge}};
    auto components_json = [&](const std::vector<std::vector<int>>& components) {
        ordered_json parts = ordered_json::array();
        for (const auto& component : components) {
            ordered_json labels = ordered_json::array();
            for (int item : component) labels.push_back(ids.items[item]);
            parts.push_back(std::move(labels));
        }
        return parts;
    };
    if (!report.pooled_connected) out["pooled_components"] = components_json(report.pooled_components);
    ordered_json broken = ordered_json::array();
    for (std::size_t k = 0; k < report.per_judge_connected.size(); ++k) {
        if (report.per_judge_connected[k]) continue;
        broken.push_back(ordered_json{{"judge", ids.judges[k]},
                                      {"components", components_json(report.judge_components[k])}});
    }
    if (!broken.empty()) out["disconnected_judges"] = std::move(broken);
    return out;
}

ordered_json intervals_json(const std::vector<hja::Interval>& intervals) {
    ordered_json out = ordered_json::array();
    for (const auto& ci : intervals) {
        out.push_back(ordered_json{{"target", ci.target},
                                   {"estimate", ci.estimate},
                                   {"se", ci.se},
                                   {"lower", ci.lower},
                                   {"upper", ci.upper}});
    }
    return out;
}

std::string timestamp() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

hja::RecordFormat parse_format(const std::string& name) {
    if (name == "csv") return hja::RecordFormat::csv;
    if (name == "jsonl") return hja::RecordFormat::jsonl;
    throw hja::ValidationError("unknown format: " + name);
}

std::vector<hja::ComparisonRecord> load_records(const std::string& path,
                                                const std::string& format) {
    auto parsed = hja::parse_records_file(path, parse_format(format));
    if (parsed.stats.dropped > 0) {
        std::cerr << "note: dropped " << parsed.stats.dropped << " malformed record(s) from "
                  << path << "\n";
    }
    if (parsed.records.empty()) throw hja::ValidationError("no usable records in " + path);
    return parsed.records;
}

void write_output(const std::string& path, const std::string& text) {
    if (path == "-" || path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw hja::IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw hja::IoError("failed writing " + path);
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string token;
    std::istringstream stream(text);
    while (std::getline(stream, token, sep)) parts.push_back(token);
    if (!text.empty() && text.back() == sep) parts.push_back("");
    return parts;
}

std::string trim(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = text.find_last_not_of(" \t\r");
    return text.substr(first, last - first + 1);
}

long parse_long(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        const long value = std::stol(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return value;
    } catch (const std::exception&) {
        throw hja::ValidationError("expected an integer for " + what + ", got '" + text + "'");
    }
}

double parse_double(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        const double value = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return value;
    } catch (const std::exception&) {
        throw hja::ValidationError("expected a number for " + what + ", got '" + text + "'");
    }
}

struct SolverFlags {
    double tau = 30.0;
    double tau_growth = 10.0;
    double tol = 1e-8;
    double inner_tol = 1e-9;
    int max_iters = 500;
    bool allow_disconnected = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--tau", tau, "Proximal weight of the block updates");
        cmd->add_option("--tau-growth", tau_growth, "Multiplier applied to tau after a guard failure");
        cmd->add_option("--tol", tol, "Relative likelihood change that stops the solver");
        cmd->add_option("--inner-tol", inner_tol, "Gradient norm target of the block subproblems");
        cmd->add_option("--max-iters", max_iters, "Outer iteration cap");
        cmd->add_flag("--allow-disconnected", allow_disconnected,
                      "Accept judges with disconnected comparison graphs (pooled graph must still "
                      "be connected; judge-level inference is weaker)");
    }

    hja::SolverConfig to_config(int rank) const {
        hja::SolverConfig config;
        config.rank = rank;
        config.tau = tau;
        config.tau_growth = tau_growth;
        config.tol = tol;
        config.inner_tol = inner_tol;
        config.max_iters = max_iters;
        config.allow_disconnected = allow_disconnected;
        return config;
    }

    ordered_json to_json() const {
        return ordered_json{{"tau", tau},           {"tau_growth", tau_growth},
                            {"tol", tol},           {"inner_tol", inner_tol},
                            {"max_iters", max_iters}, {"allow_disconnected", allow_disconnected}};
    }
};

std::string target_label(const hja::TargetSpec& target, const hja::IdMap& ids) {
    const auto judge = [&] { return ids.judges[target.judge]; };
    const auto item_i = [&] { return ids.items[target.item_i]; };
    const auto item_j = [&] { return ids.items[target.item_j]; };
    switch (target.kind) {
        case hja::TargetKind::consensus_contrast:
            return "mu[" + item_i() + "]-mu[" + item_j() + "]";
        case hja::TargetKind::judge_contrast:
            return "score[" + judge() + "," + item_i() + "]-score[" + judge() + "," + item_j() + "]";
        case hja::TargetKind::gamma_entry:
            return "gamma[" + judge() + "]";
        case hja::TargetKind::pairwise_prob:
            return "prob[" + judge() + "," + item_i() + ">" + item_j() + "]";
        case hja::TargetKind::score_entry:
            return "score[" + judge() + "," + item_i() + "]";
        case hja::TargetKind::leverage:
            return "leverage[" + judge() + "]";
    }
    return "target";
}

int find_judge_or_throw(const hja::IdMap& ids, const std::string& label) {
    const int k = ids.find_judge(label);
    if (k < 0) throw hja::ValidationError("unknown judge label: " + label);
    return k;
}

int find_item_or_throw(const hja::IdMap& ids, const std::string& label) {
    const int i = ids.find_item(label);
    if (i < 0) throw hja::ValidationError("unknown item label: " + label);
    return i;
}

/* Comma list of groups (consensus_contrasts, gammas, score_entries,
 * leverages, none) and label-addressed singles (pair:A:B, gamma:J, score:J:A,
 * prob:J:A:B, judge_contrast:J:A:B, leverage:J). */
std::vector<hja::TargetSpec> parse_targets(const std::string& text, const hja::IdMap& ids,
                                           int rank) {
    std::vector<hja::TargetSpec> targets;
    for (const std::string& raw : split(text, ',')) {
        const std::string token = trim(raw);
        if (token.empty() || token == "none") continue;
        if (token == "consensus_contrasts") {
            for (int i = 0; i < ids.num_items(); ++i) {
                for (int j = i + 1; j < ids.num_items(); ++j) {
                    targets.push_back({hja::TargetKind::consensus_contrast, -1, i, j});
                }
            }
            continue;
        }
        if (token == "gammas") {
            for (int k = 0; k < ids.num_judges(); ++k) {
                targets.push_back({hja::TargetKind::gamma_entry, k, -1, -1});
            }
            continue;
        }
        if (token == "score_entries") {
            for (int k = 0; k < ids.num_judges(); ++k) {
                for (int i = 0; i < ids.num_items(); ++i) {
                    targets.push_back({hja::TargetKind::score_entry, k, i, -1});
                }
            }
            continue;
        }
        if (token == "leverages") {
            if (rank == 0) {
                throw hja::ValidationError("leverage targets need a positive residual rank");
            }
            for (int k = 0; k < ids.num_judges(); ++k) {
                targets.push_back({hja::TargetKind::leverage, k, -1, -1});
            }
            continue;
        }
        const auto parts = split(token, ':');
        const std::string& kind = parts[0];
        if (kind == "pair" && parts.size() == 3) {
            targets.push_back({hja::TargetKind::consensus_contrast, -1,
                               find_item_or_throw(ids, parts[1]), find_item_or_throw(ids, parts[2])});
        } else if (kind == "gamma" && parts.size() == 2) {
            targets.push_back({hja::TargetKind::gamma_entry, find_judge_or_throw(ids, parts[1]), -1, -1});
        } else if (kind == "score" && parts.size() == 3) {
            targets.push_back({hja::TargetKind::score_entry, find_judge_or_throw(ids, parts[1]),
                               find_item_or_throw(ids, parts[2]), -1});
        } else if (kind == "prob" && parts.size() == 4) {
            targets.push_back({hja::TargetKind::pairwise_prob, find_judge_or_throw(ids, parts[1]),
                               find_item_or_throw(ids, parts[2]), find_item_or_throw(ids, parts[3])});
        } else if (kind == "judge_contrast" && parts.size() == 4) {
            targets.push_back({hja::TargetKind::judge_contrast, find_judge_or_throw(ids, parts[1]),
                               find_item_or_throw(ids, parts[2]), find_item_or_throw(ids, parts[3])});
        } else if (kind == "leverage" && parts.size() == 2) {
            if (rank == 0) {
                throw hja::ValidationError("leverage targets need a positive residual rank");
            }
            targets.push_back({hja::TargetKind::leverage, find_judge_or_throw(ids, parts[1]), -1, -1});
        } else {
            throw hja::ValidationError("unrecognized target: " + token);
        }
    }
    return targets;
}

struct FitOptions {
    std::string input;
    std::string format = "csv";
    std::string rank = "auto";
    std::string rank_method = "bic";
    int folds = 5;
    SolverFlags solver;
    unsigned long seed = 0;
    double level = 0.95;
    std::string targets = "consensus_contrasts,gammas";
    std::string out = "-";
    std::string export_counts;
    int threads = 1;
    bool deterministic = false;
};

int run_fit(const FitOptions& opt) {
    const auto records = load_records(opt.input, opt.format);
    const auto counts = hja::aggregate(records);
    if (!opt.export_counts.empty()) write_output(opt.export_counts, hja::snapshot_json(counts));

    const auto graph = hja::check_connectivity(counts);
    if (!graph.pooled_connected) {
        throw hja::ConnectivityError("pooled comparison graph is disconnected:\n" +
                                     hja::describe_components(graph, counts.id_map));
    }
    std::vector<std::string> warnings;
    if (!graph.all_judges_connected()) {
        if (!opt.solver.allow_disconnected) {
            throw hja::ConnectivityError(
                "some judges have disconnected comparison graphs (rerun with "
                "--allow-disconnected to proceed on the pooled graph):\n" +
                hja::describe_components(graph, counts.id_map));
        }
        warnings.push_back(
            "disconnected judge graphs accepted; their estimates lean on the pooled "
            "graph and judge-level intervals may be optimistic");
    }

    int rank = 0;
    ordered_json selection_json;
    if (opt.rank == "auto") {
        const auto method = opt.rank_method == "cv" ? hja::RankMethod::cv : hja::RankMethod::bic;
        if (opt.rank_method != "cv" && opt.rank_method != "bic") {
            throw hja::ValidationError("unknown rank method: " + opt.rank_method);
        }
        const int bound = hja::max_rank(counts.num_judges(), counts.num_items());
        const auto selection =
            hja::select_rank(records, method, bound, opt.folds, hja::derive_seed(opt.seed, 7),
                             opt.solver.to_config(0));
        rank = selection.chosen_rank;
        ordered_json scores;
        for (const auto& [r, score] : selection.per_rank_scores) {
            scores[std::to_string(r)] = score;
        }
        selection_json = ordered_json{{"method", opt.rank_method},
                                      {"chosen_rank", selection.chosen_rank},
                                      {"scores", std::move(scores)},
                                      {"warnings", selection.warnings}};
    } else {
        rank = static_cast<int>(parse_long(opt.rank, "--rank"));
    }

    const auto result = hja::fit(counts, opt.solver.to_config(rank));
    warnings.insert(warnings.end(), result.warnings.begin(), result.warnings.end());

    const auto targets = parse_targets(opt.targets, counts.id_map, rank);
    std::vector<hja::Interval> intervals;
    if (!targets.empty()) {
        const auto covariance = hja::tangent_covariance(
            hja::fisher_info(result.params, counts), hja::tangent_basis(result.params));
        intervals.reserve(targets.size());
        for (const auto& target : targets) {
            auto ci = hja::target_ci(result.params, covariance, target, opt.level);
            ci.target = target_label(target, counts.id_map);
            intervals.push_back(std::move(ci));
        }
    }

    const auto leverage = hja::leverage_diagnostics(result.params);
    int flagged = -1;
    double top_rho = 0.0;
    for (std::size_t k = 0; k < leverage.size(); ++k) {
        if (leverage[k].rho > top_rho) {
            top_rho = leverage[k].rho;
            flagged = static_cast<int>(k);
        }
    }
    ordered_json leverage_json = ordered_json::array();
    for (std::size_t k = 0; k < leverage.size(); ++k) {
        leverage_json.push_back(ordered_json{{"judge", counts.id_map.judges[k]},
                                             {"h", leverage[k].h},
                                             {"rho", leverage[k].rho},
                                             {"flagged", static_cast<int>(k) == flagged}});
    }

    ordered_json report;
    report["schema_version"] = 1;
    report["command"] = "fit";
    if (!opt.deterministic) report["generated_at"] = timestamp();
    report["config"] = ordered_json{{"input", opt.input},
                                    {"format", opt.format},
                                    {"rank", opt.rank},
                                    {"rank_method", opt.rank_method},
                                    {"folds", opt.folds},
                                    {"solver", opt.solver.to_json()},
                                    {"seed", opt.seed},
                                    {"level", opt.level},
                                    {"targets", opt.targets},
                                    {"threads", opt.threads},
                                    {"out", opt.out}};
    report["id_map"] = id_map_json(counts.id_map);
    report["graph_report"] = graph_json(graph, counts.id_map);
    if (!selection_json.is_null()) report["rank_selection"] = selection_json;
    report["params"] = params_json(result.params);
    report["uvt"] = matrix_json(result.params.u * result.params.v.transpose());
    report["constraints"] = constraints_json(hja::check_constraints(result.params));
    report["fit"] = ordered_json{{"converged", result.converged},
                                 {"iterations", result.iterations},
                                 {"guard_failures", result.guard_failures},
                                 {"final_nll", result.final_nll},
                                 {"n_total", counts.n_total}};
    report["nll_trace"] = result.nll_trace;
    report["intervals"] = intervals_json(intervals);
    report["leverage"] = std::move(leverage_json);
    report["warnings"] = warnings;
    write_output(opt.out, report.dump(2) + "\n");
    return 0;
}

struct DecomposeOptions {
    std::string input;
    std::string rank = "auto";
    double tol = 1e-8;
    std::string out = "-";
    bool deterministic = false;
};

/* Header row: corner cell then item labels; one row per judge with the
 * label in column 1. */
std::pair<hja::ScoreMatrix, hja::IdMap> read_score_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw hja::IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw hja::FormatError("empty score matrix file");
    const auto header = split(line, ',');
    if (header.size() < 3) throw hja::FormatError("score matrix needs at least two item columns");
    hja::IdMap ids;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const std::string label = trim(header[c]);
        if (label.empty()) throw hja::FormatError("empty item label in header");
        if (ids.find_item(label) >= 0) throw hja::FormatError("duplicate item label: " + label);
        ids.add_item(label);
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != header.size()) {
            throw hja::FormatError("row with " + std::to_string(cells.size()) +
                                   " cells, expected " + std::to_string(header.size()));
        }
        const std::string label = trim(cells[0]);
        if (label.empty()) throw hja::FormatError("empty judge label");
        if (ids.find_judge(label) >= 0) throw hja::FormatError("duplicate judge label: " + label);
        ids.add_judge(label);
        std::vector<double> row;
        for (std::size_t c = 1; c < cells.size(); ++c) {
            row.push_back(parse_double(trim(cells[c]), "score cell"));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw hja::FormatError("score matrix has no judge rows");
    hja::ScoreMatrix s;
    s.s.resize(static_cast<Eigen::Index>(rows.size()), ids.num_items());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int c = 0; c < ids.num_items(); ++c) s.s(static_cast<Eigen::Index>(r), c) = rows[r][c];
    }
    return {std::move(s), std::move(ids)};
}

int run_decompose(const DecomposeOptions& opt) {
    auto [scores, ids] = read_score_matrix(opt.input);
    std::optional<int> rank;
    if (opt.rank != "auto") rank = static_cast<int>(parse_long(opt.rank, "--rank"));
    hja::DecomposeDiagnostics diagnostics;
    const auto params = hja::decompose(scores, rank, opt.tol, &diagnostics);

    ordered_json report;
    report["schema_version"] = 1;
    report["command"] = "decompose";
    if (!opt.deterministic) report["generated_at"] = timestamp();
    report["config"] = ordered_json{
        {"input", opt.input}, {"rank", opt.rank}, {"tol", opt.tol}, {"out", opt.out}};
    report["id_map"] = id_map_json(ids);
    report["params"] = params_json(params);
    report["uvt"] = matrix_json(params.u * params.v.transpose());
    report["constraints"] = constraints_json(hja::check_constraints(params));
    report["diagnostics"] =
        ordered_json{{"residual_singular_values", vector_json(diagnostics.residual_singular_values)},
                     {"chosen_rank", diagnostics.chosen_rank},
                     {"ambiguous_rank", diagnostics.ambiguous_rank}};
    write_output(opt.out, report.dump(2) + "\n");
    return 0;
}

struct SimulateOptions {
    std::string grid = "n_cmp=400,800,1200";
    int judges = 4;
    int items = 8;
    int rank = 1;
    double het = 1.0;
    long n_cmp = 800;
    int seeds = 50;
    unsigned long seed = 0;
    double level = 0.95;
    SolverFlags solver;
    int threads = 1;
    std::string out = "-";
};

int run_simulate(const SimulateOptions& opt) {
    const auto eq = opt.grid.find('=');
    if (eq == std::string::npos) {
        throw hja::ValidationError("--grid wants name=v1,v2,... with name n_cmp or het");
    }
    const std::string name = trim(opt.grid.substr(0, eq));
    hja::StudyConfig config;
    if (name == "n_cmp") {
        config.grid_kind = hja::StudyGrid::n_cmp;
    } else if (name == "het" || name == "het_scale") {
        config.grid_kind = hja::StudyGrid::het_scale;
    } else {
        throw hja::ValidationError("unknown grid dimension: " + name);
    }
    for (const std::string& part : split(opt.grid.substr(eq + 1), ',')) {
        config.grid.push_back(parse_double(trim(part), "--grid value"));
    }
    if (config.grid.empty()) throw hja::ValidationError("empty grid");

    if (opt.rank < 0 || opt.rank > hja::max_rank(opt.judges, opt.items)) {
        throw hja::RankTooLarge("rank " + std::to_string(opt.rank) + " exceeds min(K-1, N-2) = " +
                                std::to_string(hja::max_rank(opt.judges, opt.items)));
    }
    config.truth = {opt.judges, opt.items, opt.rank, opt.het};
    config.n_cmp = opt.n_cmp;
    config.n_seeds = opt.seeds;
    config.seed = opt.seed;
    config.solver = opt.solver.to_config(0);
    config.level = opt.level;
    config.threads = opt.threads;
    write_output(opt.out, hja::study_csv(hja::run_recovery_study(config)));
    return 0;
}

struct SelectRankOptions {
    std::string input;
    std::string format = "csv";
    std::string rank_method = "bic";
    std::string max_rank = "auto";
    int folds = 5;
    unsigned long seed = 0;
    SolverFlags solver;
    std::string out = "-";
    bool deterministic = false;
};

int run_select_rank(const SelectRankOptions& opt) {
    if (opt.rank_method != "cv" && opt.rank_method != "bic") {
        throw hja::ValidationError("unknown rank method: " + opt.rank_method);
    }
    const auto records = load_records(opt.input, opt.format);
    const auto counts = hja::aggregate(records);
    const int bound = opt.max_rank == "auto"
                          ? hja::max_rank(counts.num_judges(), counts.num_items())
                          : static_cast<int>(parse_long(opt.max_rank, "--max-rank"));
    const auto method = opt.rank_method == "cv" ? hja::RankMethod::cv : hja::RankMethod::bic;
    const auto selection = hja::select_rank(records, method, bound, opt.folds,
                                            hja::derive_seed(opt.seed, 7), opt.solver.to_config(0));

    ordered_json scores;
    for (const auto& [r, score] : selection.per_rank_scores) scores[std::to_string(r)] = score;
    ordered_json report;
    report["schema_version"] = 1;
    report["command"] = "select-rank";
    if (!opt.deterministic) report["generated_at"] = timestamp();
    report["config"] = ordered_json{{"input", opt.input},     {"format", opt.format},
                                    {"rank_method", opt.rank_method}, {"max_rank", opt.max_rank},
                                    {"folds", opt.folds},     {"seed", opt.seed},
                                    {"solver", opt.solver.to_json()}, {"out", opt.out}};
    report["id_map"] = id_map_json(counts.id_map);
    report["chosen_rank"] = selection.chosen_rank;
    report["scores"] = std::move(scores);
    report["warnings"] = selection.warnings;
    try {
        report["scree"] = vector_json(hja::spectral_scree(counts, opt.solver.to_config(0)));
    } catch (const std::runtime_error&) {
        report["scree"] = nullptr;
    }
    write_output(opt.out, report.dump(2) + "\n");
    return 0;
}

struct EvaluateOptions {
    std::string input;
    std::string format = "csv";
    std::string dataset;
    double test_fraction = 0.2;
    std::string report_steps = "1,5,10";
    int near_tie_max_pairs = 20;
    int near_tie_min_records = 20;
    int seeds = 20;
    unsigned long seed = 0;
    int folds = 5;
    SolverFlags solver;
    int threads = 1;
    std::string out = "-";
};

int run_evaluate(const EvaluateOptions& opt) {
    const auto records = load_records(opt.input, opt.format);
    hja::ProtocolConfig config;
    config.test_fraction = opt.test_fraction;
    config.report_steps.clear();
    for (const std::string& part : split(opt.report_steps, ',')) {
        config.report_steps.push_back(static_cast<int>(parse_long(trim(part), "--report-steps")));
    }
    config.near_tie_max_pairs = opt.near_tie_max_pairs;
    config.near_tie_min_records = opt.near_tie_min_records;
    config.cv_folds = opt.folds;
    config.threads = opt.threads;
    if (opt.seeds < 1) throw hja::ValidationError("need at least one seed");
    config.seeds.clear();
    for (int s = 0; s < opt.seeds; ++s) config.seeds.push_back(hja::derive_seed(opt.seed, s, 90));

    const auto rows = hja::run_evaluation(records, config, opt.solver.to_config(0));
    const std::string dataset =
        opt.dataset.empty() ? std::filesystem::path(opt.input).stem().string() : opt.dataset;
    write_output(opt.out, hja::evaluation_csv(rows, dataset));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Consensus rankings, judge sensitivities, and structured judge disagreement "
                 "from pairwise comparisons"};
    app.require_subcommand(1);
    std::function<int()> runner;

    auto fit_opt = std::make_shared<FitOptions>();
    auto* fit_cmd = app.add_subcommand("fit", "Estimate the model and report intervals");
    fit_cmd->add_option("--input", fit_opt->input, "Comparison records file")->required();
    fit_cmd->add_option("--format", fit_opt->format, "Input format")
        ->check(CLI::IsMember({"csv", "jsonl"}));
    fit_cmd->add_option("--rank", fit_opt->rank, "Residual rank, an integer or 'auto'");
    fit_cmd->add_option("--rank-method", fit_opt->rank_method, "Selection rule when --rank auto")
        ->check(CLI::IsMember({"bic", "cv"}));
    fit_cmd->add_option("--folds", fit_opt->folds, "Folds for cross-validated selection");
    fit_opt->solver.attach(fit_cmd);
    fit_cmd->add_option("--seed", fit_opt->seed, "Seed for randomized selection folds");
    fit_cmd->add_option("--level", fit_opt->level, "Confidence level");
    fit_cmd->add_option("--targets", fit_opt->targets,
                        "Comma list of interval targets: groups consensus_contrasts, gammas, "
                        "score_entries, leverages, or singles like pair:A:B, gamma:J, score:J:A, "
                        "prob:J:A:B, judge_contrast:J:A:B, leverage:J; 'none' skips intervals");
    fit_cmd->add_option("--out", fit_opt->out, "Report path, '-' for stdout");
    fit_cmd->add_option("--export-counts", fit_opt->export_counts,
                        "Also write the aggregated counts snapshot JSON here");
    fit_cmd->add_option("--threads", fit_opt->threads, "Worker cap");
    fit_cmd->add_flag("--deterministic", fit_opt->deterministic, "Omit the timestamp field");
    fit_cmd->callback([fit_opt, &runner] { runner = [fit_opt] { return run_fit(*fit_opt); }; });

    auto dec_opt = std::make_shared<DecomposeOptions>();
    auto* dec_cmd = app.add_subcommand("decompose", "Split a row-centered score matrix");
    dec_cmd->add_option("--input", dec_opt->input, "Score matrix CSV")->required();
    dec_cmd->add_option("--rank", dec_opt->rank, "Residual rank, an integer or 'auto'");
    dec_cmd->add_option("--tol", dec_opt->tol, "Row centering and constraint tolerance");
    dec_cmd->add_option("--out", dec_opt->out, "Report path, '-' for stdout");
    dec_cmd->add_flag("--deterministic", dec_opt->deterministic, "Omit the timestamp field");
    dec_cmd->callback([dec_opt, &runner] { runner = [dec_opt] { return run_decompose(*dec_opt); }; });

    auto sim_opt = std::make_shared<SimulateOptions>();
    auto* sim_cmd = app.add_subcommand("simulate", "Synthetic recovery study over a grid");
    sim_cmd->add_option("--grid", sim_opt->grid, "Sweep, e.g. n_cmp=400,800,1200 or het=0.5,1,2");
    sim_cmd->add_option("--judges", sim_opt->judges, "Judges in the generating truth");
    sim_cmd->add_option("--items", sim_opt->items, "Items in the generating truth");
    sim_cmd->add_option("--rank", sim_opt->rank, "Residual rank of the generating truth");
    sim_cmd->add_option("--het", sim_opt->het, "Heterogeneity scale when sweeping n_cmp");
    sim_cmd->add_option("--n-cmp", sim_opt->n_cmp, "Comparison budget when sweeping het");
    sim_cmd->add_option("--seeds", sim_opt->seeds, "Replications per grid point");
    sim_cmd->add_option("--seed", sim_opt->seed, "Master seed");
    sim_cmd->add_option("--level", sim_opt->level, "Confidence level for coverage");
    sim_opt->solver.attach(sim_cmd);
    sim_cmd->add_option("--threads", sim_opt->threads, "Worker cap");
    sim_cmd->add_option("--out", sim_opt->out, "CSV path, '-' for stdout");
    sim_cmd->callback([sim_opt, &runner] { runner = [sim_opt] { return run_simulate(*sim_opt); }; });

    auto sel_opt = std::make_shared<SelectRankOptions>();
    auto* sel_cmd = app.add_subcommand("select-rank", "Pick the residual rank by BIC or CV");
    sel_cmd->add_option("--input", sel_opt->input, "Comparison records file")->required();
    sel_cmd->add_option("--format", sel_opt->format, "Input format")
        ->check(CLI::IsMember({"csv", "jsonl"}));
    sel_cmd->add_option("--rank-method", sel_opt->rank_method, "Selection rule")
        ->check(CLI::IsMember({"bic", "cv"}));
    sel_cmd->add_option("--max-rank", sel_opt->max_rank, "Candidate cap, an integer or 'auto'");
    sel_cmd->add_option("--folds", sel_opt->folds, "Folds for cross-validation");
    sel_cmd->add_option("--seed", sel_opt->seed, "Seed for fold assignment");
    sel_opt->solver.attach(sel_cmd);
    sel_cmd->add_option("--out", sel_opt->out, "Report path, '-' for stdout");
    sel_cmd->add_flag("--deterministic", sel_opt->deterministic, "Omit the timestamp field");
    sel_cmd->callback(
        [sel_opt, &runner] { runner = [sel_opt] { return run_select_rank(*sel_opt); }; });

    auto eval_opt = std::make_shared<EvaluateOptions>();
    auto* eval_cmd = app.add_subcommand("evaluate", "Hold-out, robustness, and near-tie protocols");
    eval_cmd->add_option("--input", eval_opt->input, "Comparison records file")->required();
    eval_cmd->add_option("--format", eval_opt->format, "Input format")
        ->check(CLI::IsMember({"csv", "jsonl"}));
    eval_cmd->add_option("--dataset", eval_opt->dataset, "Dataset label in the CSV");
    eval_cmd->add_option("--test-fraction", eval_opt->test_fraction, "Held-out record share");
    eval_cmd->add_option("--report-steps", eval_opt->report_steps,
                         "Noisy-judge injection steps to report");
    eval_cmd->add_option("--near-tie-max-pairs", eval_opt->near_tie_max_pairs,
                         "Cap on selected near-tie pairs");
    eval_cmd->add_option("--near-tie-min-records", eval_opt->near_tie_min_records,
                         "Training records a pair needs to qualify");
    eval_cmd->add_option("--seeds", eval_opt->seeds, "Number of random splits");
    eval_cmd->add_option("--seed", eval_opt->seed, "Master seed");
    eval_cmd->add_option("--folds", eval_opt->folds, "Folds for the per-split rank choice");
    eval_opt->solver.attach(eval_cmd);
    eval_cmd->add_option("--threads", eval_opt->threads, "Worker cap");
    eval_cmd->add_option("--out", eval_opt->out, "CSV path, '-' for stdout");
    eval_cmd->callback(
        [eval_opt, &runner] { runner = [eval_opt] { return run_evaluate(*eval_opt); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        return runner();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify_exit(e);
    }
}
