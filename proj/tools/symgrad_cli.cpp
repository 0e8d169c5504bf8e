// symgrad: generate data, train a classifier, extract gradients, and search for
// symbolic expressions that explain the classifier's decision function.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "symgrad/dataset.hpp"
#include "symgrad/equivalence.hpp"
#include "symgrad/errors.hpp"
#include "symgrad/gradients.hpp"
#include "symgrad/hashing.hpp"
#include "symgrad/neuralnet.hpp"
#include "symgrad/symclass.hpp"
#include "symgrad/symsearch.hpp"
#include "symgrad/textio.hpp"

namespace fs = std::filesystem;
using namespace symgrad;

namespace {

// Fixed artifact names inside the working directory.
constexpr const char* kTrain = "train.csv";
constexpr const char* kVal = "val.csv";
constexpr const char* kModel = "model.json";
constexpr const char* kHistory = "history.csv";
constexpr const char* kGradients = "gradients.csv";
constexpr const char* kFront = "front.csv";
constexpr const char* kSearchLog = "search_log.txt";
constexpr const char* kClassFront = "symclass_front.csv";
constexpr const char* kClassLog = "symclass_log.txt";
constexpr const char* kVerify = "verify.csv";
constexpr const char* kReport = "report.md";
constexpr const char* kReportTsv = "report.tsv";
constexpr const char* kManifest = "manifest.json";

std::string data_name(int experiment) { return fmt::format("exp{}.csv", experiment); }

std::string producer_of(const std::string& name) {
    static const std::map<std::string, std::string> producers{
        {kTrain, "train"},     {kVal, "train"},          {kModel, "train"},   {kGradients, "extract"},
        {kFront, "interpret"}, {kClassFront, "symclass"}, {kVerify, "verify"},
    };
    auto it = producers.find(name);
    return it == producers.end() ? "gen" : it->second;
}

/// Hashes of every artifact a stage wrote, and of the inputs it consumed.
class Manifest {
public:
    explicit Manifest(fs::path dir) : dir_(std::move(dir)) {
        const auto path = dir_ / kManifest;
        if (!fs::exists(path)) {
            doc_ = {{"format", "symgrad-manifest"}, {"version", 1}, {"artifacts", nlohmann::ordered_json::object()}};
            return;
        }
        std::ifstream in(path);
        try {
            doc_ = nlohmann::ordered_json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(fmt::format("{}: {}", path.string(), e.what()));
        }
        if (!doc_.contains("artifacts")) throw DataError(fmt::format("{}: no artifacts table", path.string()));
    }

    /// Checks that an upstream artifact exists and still matches what its stage recorded.
    fs::path require(const std::string& name) const {
        const auto path = dir_ / name;
        if (!fs::exists(path)) {
            throw StaleArtifactError(
                fmt::format("missing upstream artifact {}; run `symgrad {}` first", path.string(), producer_of(name)));
        }
        const auto& artifacts = doc_["artifacts"];
        if (!artifacts.contains(name)) return path;
        const auto& entry = artifacts[name];
        if (sha256_file(path) != entry["sha256"].get<std::string>()) {
            throw StaleArtifactError(fmt::format("{} changed after `symgrad {}` wrote it; rerun that stage", name,
                                                 entry["stage"].get<std::string>()));
        }
        for (const auto& [input, hash] : entry["inputs"].items()) {
            if (artifacts.contains(input) && artifacts[input]["sha256"] != hash) {
                throw StaleArtifactError(fmt::format("{} was built from an older {}; rerun `symgrad {}`", name, input,
                                                     entry["stage"].get<std::string>()));
            }
        }
        return path;
    }

    void record(const std::string& name, const std::string& stage, const std::vector<std::string>& inputs,
                const nlohmann::ordered_json& config = nlohmann::ordered_json::object()) {
        nlohmann::ordered_json in = nlohmann::ordered_json::object();
        for (const auto& i : inputs) in[i] = hash_of(i);
        doc_["artifacts"][name] = {{"stage", stage},
                                   {"sha256", sha256_file(dir_ / name)},
                                   {"inputs", in},
                                   {"config", config},
                                   {"written", timestamp()}};
    }

    void set_experiment(int experiment) { doc_["experiment"] = experiment; }

    void save() const {
        std::ofstream out(dir_ / kManifest, std::ios::binary);
        out << doc_.dump(1) << '\n';
        if (!out) throw DataError("cannot write the run manifest");
    }

private:
    static std::string timestamp() {
        return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())));
    }

    std::string hash_of(const std::string& name) const {
        const auto& artifacts = doc_["artifacts"];
        if (artifacts.contains(name)) return artifacts[name]["sha256"].get<std::string>();
        return sha256_file(dir_ / name);
    }

    fs::path dir_;
    nlohmann::ordered_json doc_;
};

struct Common {
    std::string dir;
    std::size_t threads = 1;
    bool quiet = false;

    fs::path root() const {
        fs::path p = dir;
        fs::create_directories(p);
        return p;
    }
    void say(const std::string& line) const {
        if (!quiet) std::cerr << line << '\n';
    }
};

std::vector<std::size_t> parse_widths(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(item, &used);
            if (used != item.size() || v == 0) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw UsageError(fmt::format("bad layer width '{}' in --hidden", item));
        }
    }
    if (out.empty()) throw UsageError("--hidden needs at least one width");
    return out;
}

NeuronRef parse_neuron(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw UsageError("--neuron expects layer:index");
    try {
        return {std::stoull(text.substr(0, colon)), std::stoull(text.substr(colon + 1))};
    } catch (const std::exception&) {
        throw UsageError(fmt::format("bad --neuron '{}'", text));
    }
}

// ---------------------------------------------------------------------------
// Shared search options for interpret and symclass.

struct SearchOptions {
    SearchConfig cfg;
    std::string operators = "+,-,*,/,sin,exp";

    void attach(CLI::App* cmd) {
        cmd->add_option("--seed", cfg.seed, "Search seed");
        cmd->add_option("--populations", cfg.populations, "Number of populations")->capture_default_str();
        cmd->add_option("--population-size", cfg.population_size, "Members per population")->capture_default_str();
        cmd->add_option("--iterations", cfg.iterations, "Search iterations")->capture_default_str();
        cmd->add_option("--batch-size", cfg.batch_size, "Rows per fitness batch")->capture_default_str();
        cmd->add_option("--max-size", cfg.max_size, "Maximum tree size in nodes")->capture_default_str();
        cmd->add_option("--tournament", cfg.tournament_size, "Tournament size")->capture_default_str();
        cmd->add_option("--parsimony", cfg.parsimony, "Selection penalty per node")->capture_default_str();
        cmd->add_option("--optimizer-evaluations", cfg.optimizer_evaluations, "Simplex budget per run")
            ->capture_default_str();
        cmd->add_option("--early-stop", cfg.early_stop_patience, "Stop after this many iterations without progress (0 = off)")
            ->capture_default_str();
        cmd->add_option("--operators", operators, "Operator set")->capture_default_str();
    }

    SearchConfig finish(const Common& common) {
        cfg.operators = OperatorSet::parse(operators);
        cfg.threads = common.threads;
        return cfg;
    }
};

std::map<std::string, std::string> search_metadata(const SearchConfig& cfg, const std::string& objective,
                                                   const ParetoFront& front) {
    std::map<std::string, std::string> meta{
        {"objective", objective},
        {"seed", std::to_string(cfg.seed)},
        {"populations", std::to_string(cfg.populations)},
        {"population_size", std::to_string(cfg.population_size)},
        {"iterations", std::to_string(cfg.iterations)},
        {"batch_size", std::to_string(cfg.batch_size)},
        {"max_size", std::to_string(cfg.max_size)},
        {"operators", cfg.operators.to_string()},
        {"sign_insensitive", cfg.sign_insensitive ? "true" : "false"},
    };
    if (!front.empty()) {
        const auto k = knee(front.entries());
        meta["knee"] = std::to_string(k.index);
        meta["knee_degenerate"] = k.degenerate ? "true" : "false";
    }
    return meta;
}

void print_front(std::span<const FrontEntry> front) {
    if (front.empty()) {
        std::cout << "front is empty\n";
        return;
    }
    const auto k = knee(front);
    std::cout << fmt::format("{:>10}  {:>12}  {}\n", "complexity", "loss", "expression");
    for (std::size_t i = 0; i < front.size(); ++i) {
        std::cout << fmt::format("{:>10}  {:>12.6g}  {}{}\n", front[i].complexity, front[i].loss,
                                 to_string(front[i].expression), i == k.index ? "   <- knee" : "");
    }
    if (k.degenerate) std::cout << "warning: the front has a single entry, the knee is not informative\n";
}

ProgressCallback progress_printer(const Common& common) {
    if (common.quiet) return {};
    return [](const IterationLog& l) {
        if (l.iteration % 10 == 0 || l.iteration == 1) {
            std::cerr << fmt::format("iteration {:>4}  front {:>2}  best loss {:.4g}\n", l.iteration, l.front_size,
                                     l.best_loss);
        }
    };
}

// ---------------------------------------------------------------------------
// Subcommands

struct GenOptions {
    int experiment = 1;
    std::size_t n = 10000;
    Seed seed = 0;
    double noise = 0.01;
    std::string domain;
};

void run_gen(const Common& common, const GenOptions& o) {
    GenerationOptions g{o.experiment, o.n, o.seed, o.noise, std::nullopt};
    if (!o.domain.empty()) g.domain = SamplingDomain::parse(o.domain);
    const Dataset ds = generate_experiment(g);
    const auto dir = common.root();
    const auto name = data_name(o.experiment);
    write_dataset(ds, dir / name);
    Manifest m(dir);
    m.set_experiment(o.experiment);
    m.record(name, "gen", {},
             {{"exp", o.experiment}, {"n", o.n}, {"seed", o.seed}, {"noise", o.noise}, {"domain", ds.meta.domain.to_string()}});
    m.save();
    const auto positives = std::count(ds.y.begin(), ds.y.end(), 1);
    common.say(fmt::format("wrote {} ({} rows, {} positive)", (dir / name).string(), ds.size(), positives));
}

struct TrainOptions {
    int experiment = 1;
    std::string data;
    std::string profile = "desk";
    std::string hidden;
    TrainConfig cfg;
    double train_fraction = 0.8;
    Seed split_seed = 0;
};

void run_train(const Common& common, TrainOptions o) {
    const auto dir = common.root();
    Manifest m(dir);
    const std::string name = o.data.empty() ? data_name(o.experiment) : o.data;
    const Dataset ds = read_dataset(m.require(name));

    TrainConfig cfg = o.cfg;
    if (o.profile == "full") cfg.hidden = TrainConfig::full_scale().hidden;
    else if (o.profile != "desk") throw UsageError(fmt::format("unknown profile '{}' (desk or full)", o.profile));
    if (!o.hidden.empty()) cfg.hidden = parse_widths(o.hidden);
    cfg.validate();

    auto [train_set, val_set] = split(ds, o.train_fraction, o.split_seed);
    write_dataset(train_set, dir / kTrain);
    write_dataset(val_set, dir / kVal);

    const auto start = std::chrono::steady_clock::now();
    const MlpModel init = init_model(ds.features(), cfg.hidden, cfg.seed);
    TrainResult result = train(init, train_set, val_set, cfg);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    save_model(result.model, dir / kModel);
    write_history(result.history, dir / kHistory);
    const nlohmann::ordered_json split_cfg{{"train_fraction", o.train_fraction}, {"split_seed", o.split_seed}};
    const nlohmann::ordered_json train_cfg{{"hidden", cfg.hidden},       {"l2", cfg.l2},
                                           {"dropout", cfg.dropout},     {"batch_size", cfg.batch_size},
                                           {"max_epochs", cfg.max_epochs}, {"learning_rate", cfg.learning_rate},
                                           {"decay_factor", cfg.decay_factor}, {"decay_patience", cfg.decay_patience},
                                           {"stop_patience", cfg.stop_patience}, {"seed", cfg.seed}};
    m.set_experiment(ds.meta.experiment);
    m.record(kTrain, "train", {name}, split_cfg);
    m.record(kVal, "train", {name}, split_cfg);
    m.record(kModel, "train", {kTrain, kVal}, train_cfg);
    m.record(kHistory, "train", {kTrain, kVal}, train_cfg);
    m.save();

    const auto val = evaluate(result.model, val_set);
    common.say(fmt::format("trained {} epochs in {:.1f}s, best epoch {}, validation loss {:.4f}, accuracy {:.4f}",
                           result.history.size(), seconds, result.best_epoch, val.loss, val.accuracy));
}

struct ExtractOptions {
    ExtractionConfig cfg;
    double augment_scale = 0.0;
    std::size_t augment_count = 1;
    std::string neuron;
};

void run_extract(const Common& common, const ExtractOptions& o) {
    const auto dir = common.root();
    Manifest m(dir);
    const MlpModel model = load_model(m.require(kModel));
    const Dataset train_set = read_dataset(m.require(kTrain));
    ExtractionConfig cfg = o.cfg;
    if (o.augment_scale > 0.0) cfg.augment = PerturbAugment{o.augment_scale, o.augment_count};
    if (!o.neuron.empty()) cfg.neuron = parse_neuron(o.neuron);
    const GradientSet gs = extract(model, train_set, cfg);
    write_gradient_set(gs, dir / kGradients);
    nlohmann::ordered_json extract_cfg{{"delta", cfg.delta}, {"seed", cfg.seed}};
    if (cfg.augment) extract_cfg["augment"] = {{"scale", cfg.augment->scale}, {"count", cfg.augment->count}};
    if (cfg.neuron) extract_cfg["neuron"] = {cfg.neuron->layer, cfg.neuron->index};
    m.record(kGradients, "extract", {kModel, kTrain}, extract_cfg);
    m.save();
    common.say(fmt::format("kept {} of {} points with F in [{}, {}]", gs.size(), gs.provenance.candidates, cfg.delta,
                           1.0 - cfg.delta));
}

void run_interpret(const Common& common, SearchOptions o, bool sign_insensitive) {
    const auto dir = common.root();
    Manifest m(dir);
    const GradientSet gs = read_gradient_set(m.require(kGradients));
    const MlpModel model = load_model(m.require(kModel));
    if (model_hash(model) != gs.provenance.model_hash) {
        throw StaleArtifactError("gradients.csv was extracted from a different model; rerun `symgrad extract`");
    }
    SearchConfig cfg = o.finish(common);
    cfg.sign_insensitive = sign_insensitive;
    const SearchResult result = search(gs, cfg, progress_printer(common));
    const auto meta = search_metadata(cfg, "gradient", result.front);
    write_front(result.front, dir / kFront, meta);
    write_search_log(result.log, dir / kSearchLog);
    m.record(kFront, "interpret", {kGradients}, meta);
    m.save();
    print_front(result.front.entries());
}

void run_symclass(const Common& common, SearchOptions o) {
    const auto dir = common.root();
    Manifest m(dir);
    const Dataset train_set = read_dataset(m.require(kTrain));
    const HingeDataset data = HingeDataset::from_dataset(train_set);
    SearchConfig cfg = o.finish(common);
    const SearchResult result = search_classifier(data, cfg, progress_printer(common));
    const auto meta = search_metadata(cfg, "hinge", result.front);
    write_classifier_front(result.front, dir / kClassFront, meta);
    write_search_log(result.log, dir / kClassLog);
    m.record(kClassFront, "symclass", {kTrain}, meta);
    m.save();
    print_front(result.front.entries());
}

struct VerifyOptions {
    std::string expression;
    int experiment = 0;
    std::size_t probes = 500;
    double delta = 1e-4;
};

Matrix confident_probes(const MlpModel& model, const Dataset& ds, double delta, std::size_t limit) {
    auto rows = confident_rows(model, ds.X, delta);
    if (rows.size() > limit) rows.resize(limit);
    if (rows.empty()) throw DataError("no held-out point passes the confidence filter");
    Matrix probes(static_cast<Eigen::Index>(rows.size()), ds.X.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        probes.row(static_cast<Eigen::Index>(k)) = ds.X.row(static_cast<Eigen::Index>(rows[k]));
    }
    return probes;
}

void put_alignment(textio::KeyValues& kv, const std::string& prefix, const AlignmentReport& r) {
    kv[prefix + "_probes"] = std::to_string(r.cosines.size());
    kv[prefix + "_mean_cosine"] = textio::format_double(r.mean);
    kv[prefix + "_min_cosine"] = textio::format_double(r.min);
    kv[prefix + "_fraction_above"] = textio::format_double(r.fraction_above);
    kv[prefix + "_threshold"] = textio::format_double(r.threshold);
}

void put_link(textio::KeyValues& kv, const std::string& prefix, const LinkReport& r) {
    kv[prefix + "_spearman"] = textio::format_double(r.spearman);
    kv[prefix + "_inversions"] = std::to_string(r.inversions);
    kv[prefix + "_direction"] = std::string(direction_name(r.direction));
}

// Compares the model with the experiment's known decision function and with the
// candidate expression on held-out probes.
void run_verify(const Common& common, const VerifyOptions& o) {
    const auto dir = common.root();
    Manifest m(dir);
    const MlpModel model = load_model(m.require(kModel));
    const Dataset val_set = read_dataset(m.require(kVal));
    if (o.experiment != 0 && o.experiment != val_set.meta.experiment) {
        throw UsageError(fmt::format("--exp {} but the artifacts belong to experiment {}", o.experiment,
                                     val_set.meta.experiment));
    }
    const auto formula = decision_formula(val_set.meta.experiment);

    ExprTree tree;
    std::vector<std::string> inputs{kModel, kVal};
    if (!o.expression.empty()) {
        tree = parse(o.expression, model.input_dim());
    } else {
        const auto front = read_front(m.require(kFront));
        if (front.empty()) throw DataError("front.csv is empty");
        tree = front[knee(front).index].expression;
        inputs.push_back(kFront);
    }

    const Matrix probes = confident_probes(model, val_set, o.delta, o.probes);
    const ModelField model_field(model);
    const TreeField truth(formula.form, model.input_dim());
    const TreeField candidate(tree, model.input_dim());

    const auto truth_alignment = gradient_alignment(truth, model_field, probes, 0.95);
    const auto candidate_alignment = gradient_alignment(candidate, model_field, probes, 0.95);
    const auto truth_link = link_report(model_field, truth, probes);
    const auto candidate_link = link_report(model_field, candidate, probes);

    write_link_report(truth_link, dir / kVerify);
    textio::KeyValues kv;
    kv["experiment"] = std::to_string(formula.id);
    kv["expression"] = to_string(tree, Precision::Full);
    put_alignment(kv, "truth", truth_alignment);
    put_alignment(kv, "candidate", candidate_alignment);
    put_link(kv, "truth", truth_link);
    put_link(kv, "candidate", candidate_link);
    textio::write_key_values(sidecar_path(dir / kVerify), kv);

    m.record(kVerify, "verify", inputs,
             {{"expression", kv["expression"]}, {"probes", o.probes}, {"delta", o.delta}});
    m.save();

    std::cout << fmt::format("probes: {}\n", probes.rows());
    std::cout << fmt::format("{:<28} {:>12} {:>12} {:>10} {:>12}\n", "", "mean cosine", "min cosine", "spearman",
                             "direction");
    auto line = [](const std::string& label, const AlignmentReport& a, const LinkReport& l) {
        std::cout << fmt::format("{:<28} {:>12.6f} {:>12.6f} {:>10.4f} {:>12}\n", label, a.mean, a.min, l.spearman,
                                 direction_name(l.direction));
    };
    line("model vs " + to_string(formula.form), truth_alignment, truth_link);
    line("model vs candidate", candidate_alignment, candidate_link);
    std::cout << "candidate: " << to_string(tree) << '\n';
}

void run_report(const Common& common) {
    const auto dir = fs::path(common.dir);
    const bool has_front = fs::exists(dir / kFront);
    const bool has_class = fs::exists(dir / kClassFront);
    if (!has_front && !has_class) {
        throw UsageError(fmt::format("no front in {}; run `symgrad interpret` or `symgrad symclass` first", dir.string()));
    }
    Manifest m(dir);
    std::vector<FrontEntry> front, class_front;
    if (has_front) front = read_front(m.require(kFront));
    if (has_class) class_front = read_front(m.require(kClassFront));

    std::ostringstream md;
    std::optional<int> experiment;
    if (fs::exists(sidecar_path(dir / kTrain))) {
        experiment = std::stoi(textio::require(textio::read_key_values(sidecar_path(dir / kTrain)), "id", dir / kTrain));
    }
    if (experiment) {
        const auto formula = decision_formula(*experiment);
        md << fmt::format("# Experiment {}\n\nDecision function: `{} > {}`\n\n", *experiment, to_string(formula.form),
                          formula.threshold);
    } else {
        md << "# Pareto fronts\n\n";
    }

    std::ofstream tsv(dir / kReportTsv, std::ios::binary);
    tsv << "objective\tcomplexity\tloss\tknee\texpression\n";
    auto table = [&](const std::string& title, const std::string& objective, std::span<const FrontEntry> entries) {
        md << "## " << title << "\n\n";
        std::ofstream plot(dir / (objective + "_front.tsv"), std::ios::binary);
        plot << "complexity\tloss\n";
        if (entries.empty()) {
            md << "(empty)\n\n";
            return;
        }
        const auto k = knee(entries);
        md << "| complexity | loss | expression |\n|---:|---:|:---|\n";
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const char* mark = i == k.index ? "**" : "";
            md << fmt::format("| {} | {:.6g} | {}`{}`{} |\n", entries[i].complexity, entries[i].loss, mark,
                              to_string(entries[i].expression), mark);
            tsv << fmt::format("{}\t{}\t{:.17g}\t{}\t{}\n", objective, entries[i].complexity, entries[i].loss,
                               i == k.index ? 1 : 0, to_string(entries[i].expression, Precision::Full));
            plot << entries[i].complexity << '\t' << textio::format_double(entries[i].loss) << '\n';
        }
        md << (k.degenerate ? "\nSingle-entry front; the knee is not informative.\n\n" : "\nKnee in bold.\n\n");
    };
    if (has_front) table("Gradient interpretation", "gradient", front);
    if (has_class) table("Symbolic classification", "hinge", class_front);

    if (has_front && has_class) {
        std::map<std::size_t, std::pair<const FrontEntry*, const FrontEntry*>> rows;
        for (const auto& e : front) rows[e.complexity].first = &e;
        for (const auto& e : class_front) rows[e.complexity].second = &e;
        md << "## Side by side\n\n| complexity | gradient loss | gradient expression | hinge loss | hinge expression |\n"
              "|---:|---:|:---|---:|:---|\n";
        auto cells = [](const FrontEntry* e) {
            return e ? fmt::format("{:.6g} | `{}`", e->loss, to_string(e->expression)) : std::string(" | ");
        };
        for (const auto& [c, pair] : rows) md << fmt::format("| {} | {} | {} |\n", c, cells(pair.first), cells(pair.second));
        md << '\n';
    }
    if (fs::exists(sidecar_path(dir / kVerify))) {
        md << "## Verification\n\n```\n";
        std::ifstream in(sidecar_path(dir / kVerify));
        md << in.rdbuf() << "```\n";
    }
    std::ofstream(dir / kReport, std::ios::binary) << md.str();
    std::cout << md.str();
}

std::string default_root() {
    if (const char* env = std::getenv("SYMGRAD_ROOT"); env && *env) return env;
    return ".";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Explain binary classifiers with symbolic expressions fitted to their gradients"};
    app.set_config("--config", "", "TOML or INI file with option overrides");
    app.require_subcommand(1);

    Common common;
    common.dir = default_root();
    app.add_option("--dir", common.dir, "Artifact directory (default: $SYMGRAD_ROOT or .)");
    app.add_option("--threads", common.threads, "Worker threads for the search")->check(CLI::PositiveNumber);
    app.add_flag("-q,--quiet", common.quiet, "Suppress progress output");

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "Sample a labeled data set for an experiment");
    gen_cmd->add_option("--exp", gen.experiment, "Experiment id 1..7")->required()->check(CLI::Range(1, kExperimentCount));
    gen_cmd->add_option("--n", gen.n, "Number of points")->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    gen_cmd->add_option("--noise", gen.noise, "Multiplicative noise level")->capture_default_str();
    gen_cmd->add_option("--domain", gen.domain, "Sampling box lo:hi,lo:hi,...");

    TrainOptions tr;
    auto* train_cmd = app.add_subcommand("train", "Train the classifier on a generated data set");
    train_cmd->add_option("--exp", tr.experiment, "Experiment whose data to use")->check(CLI::Range(1, kExperimentCount));
    train_cmd->add_option("--data", tr.data, "Data file name inside the artifact directory");
    train_cmd->add_option("--profile", tr.profile, "desk or full")->capture_default_str();
    train_cmd->add_option("--hidden", tr.hidden, "Hidden widths, e.g. 128,128");
    train_cmd->add_option("--seed", tr.cfg.seed, "Initialization and shuffling seed");
    train_cmd->add_option("--split-seed", tr.split_seed, "Train/validation split seed");
    train_cmd->add_option("--epochs", tr.cfg.max_epochs, "Maximum epochs")->capture_default_str();
    train_cmd->add_option("--lr", tr.cfg.learning_rate, "Learning rate")->capture_default_str();
    train_cmd->add_option("--l2", tr.cfg.l2, "L2 penalty")->capture_default_str();
    train_cmd->add_option("--dropout", tr.cfg.dropout, "Dropout rate")->capture_default_str();
    train_cmd->add_option("--batch", tr.cfg.batch_size, "Minibatch size")->capture_default_str();

    ExtractOptions ex;
    auto* extract_cmd = app.add_subcommand("extract", "Compute normalized gradients of the latent output");
    extract_cmd->add_option("--delta", ex.cfg.delta, "Confidence margin")->capture_default_str();
    extract_cmd->add_option("--augment-scale", ex.augment_scale, "Jitter scale for extra points (0 = none)");
    extract_cmd->add_option("--augment-count", ex.augment_count, "Jittered copies per point");
    extract_cmd->add_option("--seed", ex.cfg.seed, "Augmentation seed");
    extract_cmd->add_option("--neuron", ex.neuron, "Interpret layer:index instead of the output");

    SearchOptions interp;
    bool sign_insensitive = false;
    auto* interpret_cmd = app.add_subcommand("interpret", "Search expressions matching the gradients");
    interp.attach(interpret_cmd);
    interpret_cmd->add_flag("--sign-insensitive", sign_insensitive, "Score by |cosine|");

    SearchOptions cls;
    auto* symclass_cmd = app.add_subcommand("symclass", "Search expressions classifying the data directly");
    cls.attach(symclass_cmd);

    VerifyOptions ver;
    auto* verify_cmd = app.add_subcommand("verify", "Check an expression against the model on held-out points");
    verify_cmd->add_option("--expr", ver.expression, "Expression (default: the knee of front.csv)");
    verify_cmd->add_option("--exp", ver.experiment, "Expected experiment id (checked against the artifacts)");
    verify_cmd->add_option("--probes", ver.probes, "Maximum probes")->capture_default_str();
    verify_cmd->add_option("--delta", ver.delta, "Confidence margin for probes")->capture_default_str();

    auto* report_cmd = app.add_subcommand("report", "Write a Markdown summary of the fronts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ExitCode::Usage);
    }

    try {
        if (*gen_cmd) run_gen(common, gen);
        else if (*train_cmd) run_train(common, tr);
        else if (*extract_cmd) run_extract(common, ex);
        else if (*interpret_cmd) run_interpret(common, interp, sign_insensitive);
        else if (*symclass_cmd) run_symclass(common, cls);
        else if (*verify_cmd) run_verify(common, ver);
        else if (*report_cmd) run_report(common);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::Data);
    }
    return 0;
}
