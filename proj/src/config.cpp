#include "shiftuq/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace shiftuq::harness {

namespace {

struct RegistryEntry {
    MethodKind kind;
    const char* name;
};

constexpr RegistryEntry kRegistry[] = {
    {MethodKind::ConformalPrediction, "conformal_prediction"},
    {MethodKind::Ensemble, "ensemble"},
    {MethodKind::Gaussian, "gaussian"},
    {MethodKind::GaussianEnsemble, "gaussian_ensemble"},
    {MethodKind::QuantileRegression, "quantile_regression"},
    {MethodKind::GaussSelGmm, "gauss_sel_gmm"},
    {MethodKind::GaussSelKnn, "gauss_sel_knn"},
    {MethodKind::GaussSelVariance, "gauss_sel_variance"},
    {MethodKind::GaussEnsSelGmm, "gauss_ens_sel_gmm"},
    {MethodKind::GaussEnsSelEnsVariance, "gauss_ens_sel_ens_variance"},
};

bool uses_gmm(MethodKind k) { return k == MethodKind::GaussSelGmm || k == MethodKind::GaussEnsSelGmm; }

}  // namespace

std::string base_name(MethodKind kind) {
    for (const auto& e : kRegistry)
        if (e.kind == kind) return e.name;
    return "?";
}

std::string MethodId::name() const {
    std::string n = base_name(kind);
    std::vector<std::string> vars;
    if (uses_gmm(kind) && gmm_k != 4) vars.push_back("k=" + std::to_string(gmm_k));
    if (kind == MethodKind::GaussSelKnn) {
        if (knn_k != 10) vars.push_back("k=" + std::to_string(knn_k));
        if (knn_metric != selective::KnnMetric::Cosine) vars.push_back("metric=" + to_string(knn_metric));
    }
    for (std::size_t i = 0; i < vars.size(); ++i) n += (i == 0 ? ":" : ",") + vars[i];
    return n;
}

nn::Head MethodId::head() const noexcept {
    switch (kind) {
        case MethodKind::ConformalPrediction:
        case MethodKind::Ensemble: return nn::Head::Direct;
        case MethodKind::QuantileRegression: return nn::Head::Quantile;
        default: return nn::Head::Gaussian;
    }
}

bool MethodId::selective() const noexcept {
    return kind == MethodKind::GaussSelGmm || kind == MethodKind::GaussSelKnn ||
           kind == MethodKind::GaussSelVariance || kind == MethodKind::GaussEnsSelGmm ||
           kind == MethodKind::GaussEnsSelEnsVariance;
}

bool MethodId::ensemble() const noexcept {
    return kind == MethodKind::Ensemble || kind == MethodKind::GaussianEnsemble ||
           kind == MethodKind::GaussEnsSelGmm || kind == MethodKind::GaussEnsSelEnsVariance;
}

MethodId method_from_string(const std::string& text) {
    const auto colon = text.find(':');
    const std::string base = text.substr(0, colon);
    MethodId id;
    bool found = false;
    for (const auto& e : kRegistry)
        if (base == e.name) {
            id.kind = e.kind;
            found = true;
        }
    if (!found) throw ConfigError("unknown method '" + base + "'");
    if (colon == std::string::npos) return id;

    std::istringstream vars(text.substr(colon + 1));
    std::string item;
    while (std::getline(vars, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("bad method variation '" + item + "'");
        const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
        if (key == "k" && (uses_gmm(id.kind) || id.kind == MethodKind::GaussSelKnn)) {
            std::size_t k = 0;
            auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), k);
            if (ec != std::errc() || p != value.data() + value.size() || k == 0)
                throw ConfigError("bad k in method '" + text + "'");
            (uses_gmm(id.kind) ? id.gmm_k : id.knn_k) = k;
        } else if (key == "metric" && id.kind == MethodKind::GaussSelKnn) {
            try {
                id.knn_metric = selective::knn_metric_from_string(value);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        } else {
            throw ConfigError("variation '" + key + "' does not apply to method '" + base + "'");
        }
    }
    return id;
}

std::vector<MethodId> all_methods() {
    std::vector<MethodId> out;
    for (const auto& e : kRegistry) out.push_back(MethodId{e.kind});
    return out;
}

std::vector<MethodId> non_selective_methods() {
    std::vector<MethodId> out;
    for (const auto& m : all_methods())
        if (!m.selective()) out.push_back(m);
    return out;
}

void ExperimentConfig::validate() const {
    if (datasets.empty()) throw ConfigError("config: no datasets");
    std::set<std::string> ids;
    for (const auto& d : datasets) {
        if (d.id.empty()) throw ConfigError("config: dataset without id");
        if (!ids.insert(d.id).second) throw ConfigError("config: duplicate dataset id '" + d.id + "'");
        if (d.synthetic.has_value() == d.csv.has_value())
            throw ConfigError("config: dataset '" + d.id + "' needs exactly one of kind or csv");
        if (d.synthetic) {
            try {
                d.synthetic->validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError("config: dataset '" + d.id + "': " + e.what());
            }
        }
    }
    if (methods.empty()) throw ConfigError("config: no methods");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("config: alpha must lie in (0,1)");
    if (n_models_trained == 0) throw ConfigError("config: n_models_trained must be >= 1");
    if (n_models_selected == 0 || n_models_selected > n_models_trained)
        throw ConfigError("config: n_models_selected must be in 1..n_models_trained");
    if (n_repeats == 0) throw ConfigError("config: n_repeats must be >= 1");
    const bool any_ensemble =
        std::any_of(methods.begin(), methods.end(), [](const MethodId& m) { return m.ensemble(); });
    if (any_ensemble && (ensemble_M < 2 || ensemble_M > n_models_trained))
        throw ConfigError("config: ensemble_m must be in 2..n_models_trained");
    if (!(threshold_quantile > 0.0 && threshold_quantile <= 1.0))
        throw ConfigError("config: threshold_quantile must lie in (0,1]");
    if (ece_points == 0) throw ConfigError("config: ece_points must be >= 1");
    try {
        hyper.validate();
        nn::Architecture a = architecture;
        a.input_dim = 1;
        if (a.hidden.empty()) a.feature_dim = 1;
        a.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

void ExperimentConfig::apply_small() {
    n_models_trained = 8;
    n_models_selected = 3;
    n_repeats = 3;
    ensemble_M = std::min<std::size_t>(ensemble_M, n_models_trained);
    for (auto& d : datasets)
        if (d.synthetic) d.synthetic->small();
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_str = !in_str;
        if (line[i] == '#' && !in_str) return line.substr(0, i);
    }
    return line;
}

ConfigScalar parse_scalar(const std::string& raw, std::size_t line_no) {
    const std::string s = trim(raw);
    auto fail = [&](const std::string& what) {
        return ConfigError("config line " + std::to_string(line_no) + ": " + what);
    };
    if (s.empty()) throw fail("missing value");
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"') throw fail("unterminated string");
        return s.substr(1, s.size() - 2);
    }
    if (s == "true") return true;
    if (s == "false") return false;
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [p, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw fail("cannot parse value '" + s + "'");
    return v;
}

ConfigValue parse_value(const std::string& raw, std::size_t line_no) {
    const std::string s = trim(raw);
    if (!s.empty() && s.front() == '[') {
        if (s.back() != ']')
            throw ConfigError("config line " + std::to_string(line_no) + ": unterminated array");
        std::vector<ConfigScalar> items;
        std::string inner = s.substr(1, s.size() - 2), cur;
        bool in_str = false;
        for (char ch : inner) {
            if (ch == '"') in_str = !in_str;
            if (ch == ',' && !in_str) {
                if (!trim(cur).empty()) items.push_back(parse_scalar(cur, line_no));
                cur.clear();
            } else {
                cur += ch;
            }
        }
        if (!trim(cur).empty()) items.push_back(parse_scalar(cur, line_no));
        return items;
    }
    return std::visit([](auto&& v) -> ConfigValue { return v; }, parse_scalar(s, line_no));
}

}  // namespace

ConfigTables parse_config_text(const std::string& text) {
    ConfigTables tables;
    tables[""];
    std::string current;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']' || s.size() < 3)
                throw ConfigError("config line " + std::to_string(line_no) + ": bad table header");
            current = trim(s.substr(1, s.size() - 2));
            if (tables.count(current) && current != "")
                throw ConfigError("config line " + std::to_string(line_no) + ": duplicate table [" +
                                  current + "]");
            tables[current];
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(s.substr(0, eq));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        auto& table = tables[current];
        if (table.count(key))
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        table[key] = parse_value(s.substr(eq + 1), line_no);
    }
    return tables;
}

namespace {

/// Typed access that records which keys were consumed.
class TableReader {
public:
    TableReader(const std::string& name, const std::map<std::string, ConfigValue>& values)
        : name_(name), values_(values) {}

    template <typename T>
    std::optional<T> get(const std::string& key) {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        used_.insert(key);
        return convert<T>(key, it->second);
    }

    void finish() const {
        for (const auto& [k, v] : values_)
            if (!used_.count(k)) throw ConfigError("config: unknown key '" + k + "' in " + where());
    }

private:
    std::string where() const { return name_.empty() ? "top level" : "[" + name_ + "]"; }

    template <typename T>
    T convert(const std::string& key, const ConfigValue& v) {
        auto bad = [&](const char* type) {
            return ConfigError("config: key '" + key + "' in " + where() + " must be " + type);
        };
        if constexpr (std::is_same_v<T, bool>) {
            if (auto p = std::get_if<bool>(&v)) return *p;
            throw bad("a boolean");
        } else if constexpr (std::is_same_v<T, double>) {
            if (auto p = std::get_if<double>(&v)) return *p;
            throw bad("a number");
        } else if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t> ||
                             std::is_same_v<T, int>) {
            auto p = std::get_if<double>(&v);
            if (!p || *p < 0 || *p != static_cast<double>(static_cast<std::uint64_t>(*p)))
                throw bad("a non-negative integer");
            return static_cast<T>(*p);
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (auto p = std::get_if<std::string>(&v)) return *p;
            throw bad("a string");
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            auto p = std::get_if<std::vector<ConfigScalar>>(&v);
            if (!p) throw bad("an array of numbers");
            std::vector<double> out;
            for (const auto& s : *p) {
                auto d = std::get_if<double>(&s);
                if (!d) throw bad("an array of numbers");
                out.push_back(*d);
            }
            return out;
        } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
            auto p = std::get_if<std::vector<ConfigScalar>>(&v);
            if (!p) throw bad("an array of strings");
            std::vector<std::string> out;
            for (const auto& s : *p) {
                auto d = std::get_if<std::string>(&s);
                if (!d) throw bad("an array of strings");
                out.push_back(*d);
            }
            return out;
        }
    }

    std::string name_;
    const std::map<std::string, ConfigValue>& values_;
    std::set<std::string> used_;
};

synth::Range range_of(const std::vector<double>& v, const std::string& what) {
    if (v.size() != 2) throw ConfigError("config: " + what + " must be [lo, hi]");
    return {v[0], v[1]};
}

DatasetSource dataset_from_table(const std::string& id, TableReader& t) {
    DatasetSource src;
    src.id = id;
    if (auto csv = t.get<std::string>("csv")) {
        src.csv = *csv;
        if (auto v = t.get<std::string>("target")) src.schema.target_column = *v;
        if (auto v = t.get<std::string>("split")) src.schema.split_column = *v;
        if (auto v = t.get<std::vector<std::string>>("features")) src.schema.feature_columns = *v;
        return src;
    }
    synth::ShiftSpec s;
    try {
        if (auto v = t.get<std::string>("kind")) s.kind = synth::shift_kind_from_string(*v);
        if (auto v = t.get<std::string>("base")) s.intensity_base = synth::shift_kind_from_string(*v);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (auto v = t.get<int>("level")) s.level = *v;
    if (auto v = t.get<std::vector<double>>("range")) s.full_range = range_of(*v, "range");
    if (auto v = t.get<std::vector<double>>("band")) s.band = range_of(*v, "band");
    if (auto v = t.get<std::size_t>("n_train")) s.n_train = *v;
    if (auto v = t.get<std::size_t>("n_val")) s.n_val = *v;
    if (auto v = t.get<std::size_t>("n_test")) s.n_test = *v;
    if (auto v = t.get<std::size_t>("input_dim")) s.input_dim = *v;
    if (auto v = t.get<std::size_t>("embed_width")) s.embed_width = *v;
    if (auto v = t.get<double>("noise_sd")) s.noise_sd = *v;
    if (auto v = t.get<std::uint64_t>("seed")) s.seed = *v;
    src.synthetic = s;
    return src;
}

}  // namespace

ExperimentConfig config_from_text(const std::string& text) {
    const ConfigTables tables = parse_config_text(text);
    ExperimentConfig cfg;
    cfg.source_text = text;

    for (const auto& [name, values] : tables) {
        TableReader t(name, values);
        if (name.empty()) {
            if (auto v = t.get<std::uint64_t>("seed")) cfg.seed = *v;
            if (auto v = t.get<double>("alpha")) cfg.alpha = *v;
            if (auto v = t.get<std::size_t>("n_models_trained")) cfg.n_models_trained = *v;
            if (auto v = t.get<std::size_t>("n_models_selected")) cfg.n_models_selected = *v;
            if (auto v = t.get<std::size_t>("n_repeats")) cfg.n_repeats = *v;
            if (auto v = t.get<std::size_t>("ensemble_m")) cfg.ensemble_M = *v;
            if (auto v = t.get<double>("threshold_quantile")) cfg.threshold_quantile = *v;
            if (auto v = t.get<std::size_t>("ece_points")) cfg.ece_points = *v;
            if (auto v = t.get<std::string>("output_dir")) cfg.output_dir = *v;
            if (auto v = t.get<bool>("save_checkpoints")) cfg.save_checkpoints = *v;
            if (auto v = t.get<std::vector<std::string>>("methods")) {
                cfg.methods.clear();
                for (const auto& m : *v) {
                    if (m == "all") {
                        auto all = all_methods();
                        cfg.methods.insert(cfg.methods.end(), all.begin(), all.end());
                    } else if (m == "non_selective") {
                        auto ns = non_selective_methods();
                        cfg.methods.insert(cfg.methods.end(), ns.begin(), ns.end());
                    } else {
                        cfg.methods.push_back(method_from_string(m));
                    }
                }
            }
        } else if (name == "model") {
            if (auto v = t.get<std::vector<double>>("hidden")) {
                cfg.architecture.hidden.clear();
                for (double h : *v) {
                    if (h < 1 || h != static_cast<double>(static_cast<std::size_t>(h)))
                        throw ConfigError("config: [model] hidden widths must be positive integers");
                    cfg.architecture.hidden.push_back(static_cast<std::size_t>(h));
                }
            }
            if (auto v = t.get<std::size_t>("feature_dim")) cfg.architecture.feature_dim = *v;
            if (auto v = t.get<std::string>("activation")) {
                try {
                    cfg.architecture.activation = nn::activation_from_string(*v);
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(std::string("config: ") + e.what());
                }
            }
        } else if (name == "train") {
            if (auto v = t.get<int>("epochs")) cfg.hyper.epochs = *v;
            if (auto v = t.get<std::size_t>("batch_size")) cfg.hyper.batch_size = *v;
            if (auto v = t.get<double>("learning_rate")) cfg.hyper.learning_rate = *v;
            if (auto v = t.get<double>("adam_beta1")) cfg.hyper.adam_beta1 = *v;
            if (auto v = t.get<double>("adam_beta2")) cfg.hyper.adam_beta2 = *v;
            if (auto v = t.get<double>("adam_eps")) cfg.hyper.adam_eps = *v;
        } else if (name == "selective") {
            // Defaults for selective methods listed without a variation suffix.
            auto gk = t.get<std::size_t>("gmm_k");
            auto kk = t.get<std::size_t>("knn_k");
            auto km = t.get<std::string>("knn_metric");
            for (auto& m : cfg.methods) {
                if (gk && m.gmm_k == 4) m.gmm_k = *gk;
                if (kk && m.knn_k == 10) m.knn_k = *kk;
                if (km) m.knn_metric = selective::knn_metric_from_string(*km);
            }
        } else if (name.rfind("dataset.", 0) == 0) {
            cfg.datasets.push_back(dataset_from_table(name.substr(8), t));
        } else {
            throw ConfigError("config: unknown table [" + name + "]");
        }
        t.finish();
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_text(ss.str());
}

}  // namespace shiftuq::harness
