#include "tailtta/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "tailtta/error.hpp"

namespace tailtta {

namespace {

// Float-typed JSON so embeddings print as shortest round-trip 32-bit values.
using FloatJson = nlohmann::basic_json<std::map, std::vector, std::string, bool, std::int64_t, std::uint64_t, float>;
using Json = nlohmann::ordered_json;

std::string where(const std::string& source, std::size_t line) { return source + ":" + std::to_string(line); }

FloatJson parse_line(const std::string& text, const std::string& source, std::size_t line) {
    try {
        return FloatJson::parse(text);
    } catch (const FloatJson::exception& e) {
        throw Error(ErrorKind::ParseError, where(source, line) + ": " + e.what());
    }
}

template <typename T>
T field(const FloatJson& obj, const char* key, const std::string& source, std::size_t line) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw Error(ErrorKind::ParseError, where(source, line) + ": missing field '" + key + "'");
    try {
        return it->template get<T>();
    } catch (const FloatJson::exception&) {
        throw Error(ErrorKind::ParseError, where(source, line) + ": field '" + key + "' has the wrong type");
    }
}

// Reads a float row, checks its length, and brings it to unit norm.
Embedding read_unit_row(const FloatJson& arr, std::size_t dim, const std::string& what, const std::string& source,
                        std::size_t line, std::vector<std::string>& warnings) {
    if (!arr.is_array()) throw Error(ErrorKind::ParseError, where(source, line) + ": " + what + " is not an array");
    if (arr.size() != dim) {
        throw Error(ErrorKind::DimensionMismatch, where(source, line) + ": " + what + " has " +
                                                      std::to_string(arr.size()) + " coordinates, expected d=" +
                                                      std::to_string(dim));
    }
    Vector values(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        if (!arr[i].is_number()) {
            throw Error(ErrorKind::ParseError, where(source, line) + ": " + what + " coordinate " +
                                                   std::to_string(i) + " is not a number");
        }
        values[i] = static_cast<double>(arr[i].get<float>());
        if (!std::isfinite(values[i])) {
            throw Error(ErrorKind::NonFiniteInput, where(source, line) + ": " + what + " is not finite");
        }
    }
    const double n = l2_norm(values);
    if (n < 1e-12) throw Error(ErrorKind::ZeroVector, where(source, line) + ": " + what + " is a zero vector");
    if (std::abs(n - 1.0) > 1e-4) {
        warnings.push_back(where(source, line) + ": " + what + " has norm " + std::to_string(n) + "; normalized");
        return normalize(values);
    }
    return Embedding::assume_unit(std::move(values));
}

FloatJson float_row(std::span<const double> values) {
    FloatJson arr = FloatJson::array();
    for (double x : values) arr.push_back(static_cast<float>(x));
    return arr;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    return out;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

LoadedStream parse_stream(std::istream& in, const std::string& source) {
    LoadedStream out;
    std::string text;
    std::size_t line = 0;
    bool have_header = false;
    while (std::getline(in, text)) {
        ++line;
        if (blank(text)) continue;
        const FloatJson obj = parse_line(text, source, line);
        const auto type = field<std::string>(obj, "type", source, line);
        if (!have_header) {
            if (type != "header") throw Error(ErrorKind::ParseError, where(source, line) + ": expected header record");
            const auto version = field<int>(obj, "format_version", source, line);
            if (version != kFormatVersion) {
                throw Error(ErrorKind::ParseError,
                            where(source, line) + ": unsupported format_version " + std::to_string(version));
            }
            out.meta.dim = field<std::size_t>(obj, "d", source, line);
            out.meta.num_classes = field<std::size_t>(obj, "C", source, line);
            out.meta.n_views = field<int>(obj, "n_views", source, line);
            if (out.meta.dim < 1 || out.meta.num_classes < 1 || out.meta.n_views < 1) {
                throw Error(ErrorKind::ParseError, where(source, line) + ": d, C and n_views must be positive");
            }
            if (obj.contains("class_names")) {
                out.meta.class_names = field<std::vector<std::string>>(obj, "class_names", source, line);
            }
            have_header = true;
            continue;
        }
        if (type != "record") {
            throw Error(ErrorKind::ParseError, where(source, line) + ": unexpected record type '" + type + "'");
        }
        StreamRecord rec;
        rec.sample_id = field<std::int64_t>(obj, "sample_id", source, line);
        const auto it = obj.find("views");
        if (it == obj.end() || !it->is_array()) {
            throw Error(ErrorKind::ParseError, where(source, line) + ": missing views array");
        }
        if (it->size() != static_cast<std::size_t>(out.meta.n_views)) {
            throw Error(ErrorKind::ViewCountMismatch, where(source, line) + ": " + std::to_string(it->size()) +
                                                          " views, header n_views=" +
                                                          std::to_string(out.meta.n_views));
        }
        for (std::size_t n = 0; n < it->size(); ++n) {
            rec.views.push_back(
                read_unit_row((*it)[n], out.meta.dim, "view " + std::to_string(n), source, line, out.warnings));
        }
        const auto label = obj.find("true_label");
        if (label != obj.end() && !label->is_null()) {
            const auto c = field<std::int64_t>(obj, "true_label", source, line);
            if (c < 0 || static_cast<std::size_t>(c) >= out.meta.num_classes) {
                throw Error(ErrorKind::UnknownClass, where(source, line) + ": true_label " + std::to_string(c) +
                                                         " not in [0, " + std::to_string(out.meta.num_classes) + ")");
            }
            rec.true_label = static_cast<ClassId>(c);
        }
        out.records.push_back(std::move(rec));
    }
    if (!have_header) throw Error(ErrorKind::ParseError, source + ": missing header");
    return out;
}

LoadedStream load_stream(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_stream(in, path.string());
}

void write_stream(std::ostream& out, const StreamMetadata& meta, const std::vector<StreamRecord>& records) {
    FloatJson header = {{"type", "header"},
                        {"format_version", kFormatVersion},
                        {"d", meta.dim},
                        {"C", meta.num_classes},
                        {"n_views", meta.n_views}};
    if (!meta.class_names.empty()) header["class_names"] = meta.class_names;
    out << header.dump() << '\n';
    for (const auto& r : records) {
        FloatJson rec = {{"type", "record"}, {"sample_id", r.sample_id}};
        FloatJson views = FloatJson::array();
        for (const auto& v : r.views) views.push_back(float_row(v.values()));
        rec["views"] = std::move(views);
        if (r.true_label) rec["true_label"] = *r.true_label;
        out << rec.dump() << '\n';
    }
}

void write_stream(const std::filesystem::path& path, const StreamMetadata& meta,
                  const std::vector<StreamRecord>& records) {
    auto out = open_output(path);
    write_stream(out, meta, records);
}

LoadedPrototypes parse_prototypes(std::istream& in, const std::string& source) {
    LoadedPrototypes out;
    std::string text;
    std::size_t line = 0;
    std::size_t dim = 0;
    std::size_t classes = 0;
    std::size_t filled = 0;
    bool have_header = false;
    while (std::getline(in, text)) {
        ++line;
        if (blank(text)) continue;
        const FloatJson obj = parse_line(text, source, line);
        if (!have_header) {
            if (field<std::string>(obj, "type", source, line) != "prototypes") {
                throw Error(ErrorKind::ParseError, where(source, line) + ": expected prototypes header");
            }
            const auto version = field<int>(obj, "format_version", source, line);
            if (version != kFormatVersion) {
                throw Error(ErrorKind::ParseError,
                            where(source, line) + ": unsupported format_version " + std::to_string(version));
            }
            dim = field<std::size_t>(obj, "d", source, line);
            classes = field<std::size_t>(obj, "C", source, line);
            if (dim < 1 || classes < 1) {
                throw Error(ErrorKind::ParseError, where(source, line) + ": d and C must be positive");
            }
            out.protos = PrototypeMatrix(classes, dim);
            have_header = true;
            continue;
        }
        const auto c = field<std::size_t>(obj, "class", source, line);
        if (c != filled) {
            throw Error(ErrorKind::ParseError, where(source, line) + ": expected row for class " +
                                                   std::to_string(filled) + ", got " + std::to_string(c));
        }
        if (filled >= classes) {
            throw Error(ErrorKind::ShapeMismatch, where(source, line) + ": more rows than C=" + std::to_string(classes));
        }
        const auto it = obj.find("values");
        if (it == obj.end()) throw Error(ErrorKind::ParseError, where(source, line) + ": missing field 'values'");
        const Embedding row =
            read_unit_row(*it, dim, "prototype " + std::to_string(c), source, line, out.warnings);
        std::copy(row.values().begin(), row.values().end(), out.protos.row(c).begin());
        ++filled;
    }
    if (!have_header) throw Error(ErrorKind::ParseError, source + ": missing header");
    if (filled != classes) {
        throw Error(ErrorKind::ShapeMismatch,
                    source + ": " + std::to_string(filled) + " prototype rows, header C=" + std::to_string(classes));
    }
    return out;
}

LoadedPrototypes load_prototypes(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_prototypes(in, path.string());
}

void write_prototypes(std::ostream& out, const PrototypeMatrix& protos) {
    const FloatJson header = {
        {"type", "prototypes"}, {"format_version", kFormatVersion}, {"d", protos.dim()}, {"C", protos.rows()}};
    out << header.dump() << '\n';
    for (std::size_t c = 0; c < protos.rows(); ++c) {
        const FloatJson row = {{"class", c}, {"values", float_row(protos.row(c))}};
        out << row.dump() << '\n';
    }
}

void write_prototypes(const std::filesystem::path& path, const PrototypeMatrix& protos) {
    auto out = open_output(path);
    write_prototypes(out, protos);
}

// ---------------------------------------------------------------- config

namespace {

std::string format_double(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(std::string_view key, std::string_view v) {
    if (v == "inf" || v == "+inf") return INFINITY;
    if (v == "-inf") return -INFINITY;
    double x = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size() || std::isnan(x)) {
        throw Error(ErrorKind::ParseError, std::string(key) + ": '" + std::string(v) + "' is not a number");
    }
    return x;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
    Int x{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
        throw Error(ErrorKind::ParseError, std::string(key) + ": '" + std::string(v) + "' is not an integer");
    }
    return x;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw Error(ErrorKind::ParseError, std::string(key) + ": '" + std::string(v) + "' is not true/false");
}

struct ParamSpec {
    const char* key;
    const char* doc;
    std::function<void(HyperParams&, std::string_view)> set;
    std::function<std::string(const HyperParams&)> get;
};

#define TAILTTA_DOUBLE(name, member, doc)                                                          \
    ParamSpec {                                                                                    \
        name, doc, [](HyperParams& hp, std::string_view v) { hp.member = parse_double(name, v); }, \
            [](const HyperParams& hp) { return format_double(hp.member); }                         \
    }
#define TAILTTA_INT(name, member, doc)                                                                          \
    ParamSpec {                                                                                                 \
        name, doc, [](HyperParams& hp, std::string_view v) { hp.member = parse_int<decltype(hp.member)>(name, v); }, \
            [](const HyperParams& hp) { return std::to_string(hp.member); }                                     \
    }

const std::vector<ParamSpec>& param_table() {
    static const std::vector<ParamSpec> table = {
        TAILTTA_DOUBLE("epsilon", epsilon, "epsilon: guards log(p_c) in the suppression function"),
        TAILTTA_DOUBLE("s", smoothness, "s: smoothness of the suppression function"),
        TAILTTA_DOUBLE("gamma", gamma, "gamma: capacity sensitivity to class frequency"),
        TAILTTA_INT("M", base_capacity, "M: base per-class cache capacity"),
        TAILTTA_INT("M_max", max_capacity, "M_max: upper bound on base capacity"),
        TAILTTA_INT("eta", inactivity_threshold, "eta: inactivity threshold in samples"),
        TAILTTA_DOUBLE("delta", boost_scale, "delta: rejuvenation boost magnitude"),
        TAILTTA_DOUBLE("alpha_decay", boost_decay, "alpha (boost): frequency decay of the boost"),
        ParamSpec{"frequency_mode", "N_c counting: cumulative (pseudo-label history) | occupancy (cached entries)",
                  [](HyperParams& hp, std::string_view v) {
                      if (v == "cumulative") hp.frequency_mode = FrequencyMode::Cumulative;
                      else if (v == "occupancy") hp.frequency_mode = FrequencyMode::Occupancy;
                      else throw Error(ErrorKind::RangeViolation, "frequency_mode must be cumulative or occupancy");
                  },
                  [](const HyperParams& hp) { return std::string(to_string(hp.frequency_mode)); }},
        TAILTTA_DOUBLE("tau", tau, "tau: softmax temperature"),
        TAILTTA_DOUBLE("lambda1", lambda1, "lambda1: weight of the alignment loss"),
        TAILTTA_DOUBLE("lambda2", lambda2, "lambda2: weight of the hard-negative loss"),
        TAILTTA_DOUBLE("alpha_fuse", alpha_fuse, "alpha (fusion): cache affinity scale"),
        TAILTTA_DOUBLE("beta_fuse", beta_fuse, "beta (fusion): cache affinity sharpness"),
        ParamSpec{"entropy_gate", "cache admission gate in nats; auto = 0.4 ln C",
                  [](HyperParams& hp, std::string_view v) {
                      if (v == "auto") hp.entropy_gate.reset();
                      else hp.entropy_gate = parse_double("entropy_gate", v);
                  },
                  [](const HyperParams& hp) {
                      return hp.entropy_gate ? format_double(*hp.entropy_gate) : std::string("auto");
                  }},
        TAILTTA_DOUBLE("rho", rho, "rho: fraction of confident views kept"),
        TAILTTA_DOUBLE("entropy_threshold", entropy_threshold, "t: per-view entropy threshold in nats"),
        TAILTTA_INT("n_views", n_views, "N: views consumed per sample"),
        ParamSpec{"aug_prediction", "prediction inside the entropy loss: fused | textual",
                  [](HyperParams& hp, std::string_view v) {
                      if (v == "fused") hp.aug_prediction = AugPrediction::Fused;
                      else if (v == "textual") hp.aug_prediction = AugPrediction::Textual;
                      else throw Error(ErrorKind::RangeViolation, "aug_prediction must be fused or textual");
                  },
                  [](const HyperParams& hp) { return std::string(to_string(hp.aug_prediction)); }},
        TAILTTA_INT("ncl_refresh_stride", ncl_refresh_stride, "samples between hard-negative refreshes"),
        TAILTTA_INT("steps_per_sample", steps_per_sample, "optimizer steps per sample"),
        TAILTTA_DOUBLE("lr", lr, "AdamW learning rate"),
        TAILTTA_DOUBLE("beta1", beta1, "AdamW first-moment decay"),
        TAILTTA_DOUBLE("beta2", beta2, "AdamW second-moment decay"),
        TAILTTA_DOUBLE("eps_opt", eps_opt, "AdamW denominator epsilon"),
        TAILTTA_DOUBLE("weight_decay", weight_decay, "AdamW decoupled weight decay"),
        ParamSpec{"rejuvenation_synthesis", "fill inactive classes with blended synthetic features",
                  [](HyperParams& hp, std::string_view v) {
                      hp.rejuvenation_synthesis = parse_bool("rejuvenation_synthesis", v);
                  },
                  [](const HyperParams& hp) { return std::string(hp.rejuvenation_synthesis ? "true" : "false"); }},
        TAILTTA_INT("seed", seed, "session seed (recorded in reports)"),
    };
    return table;
}

#undef TAILTTA_DOUBLE
#undef TAILTTA_INT

}  // namespace

void set_param(HyperParams& hp, std::string_view key, std::string_view value) {
    for (const auto& p : param_table()) {
        if (key == p.key) {
            try {
                p.set(hp, trim(value));
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::ParseError) {
                    throw Error(ErrorKind::RangeViolation, std::string(key) + ": invalid value '" +
                                                               std::string(trim(value)) + "'");
                }
                throw;
            }
            return;
        }
    }
    throw Error(ErrorKind::UnknownKey, "unknown config key '" + std::string(key) + "'");
}

std::vector<ConfigOverride> config_echo(const HyperParams& hp) {
    std::vector<ConfigOverride> out;
    for (const auto& p : param_table()) out.emplace_back(p.key, p.get(hp));
    return out;
}

HyperParams parse_config(std::string_view text, const std::string& source, HyperParams base) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorKind::ParseError, where(source, line_no) + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        try {
            set_param(base, key, trim(line.substr(eq + 1)));
        } catch (const Error& e) {
            throw Error(e.kind(), where(source, line_no) + ": " + e.message());
        }
    }
    return base;
}

HyperParams load_config(const std::optional<std::filesystem::path>& path,
                        const std::vector<ConfigOverride>& overrides, HyperParams base) {
    HyperParams hp = std::move(base);
    if (path) {
        auto in = open_input(*path);
        std::stringstream buf;
        buf << in.rdbuf();
        hp = parse_config(buf.str(), path->string(), hp);
    }
    for (const auto& [key, value] : overrides) set_param(hp, key, value);
    hp.validate();
    return hp;
}

std::string default_config_text() {
    const HyperParams defaults;
    std::ostringstream out;
    out << "# tailtta configuration (key = value; '#' starts a comment)\n";
    for (const auto& p : param_table()) {
        out << "\n# " << p.doc << '\n' << p.key << " = " << p.get(defaults) << '\n';
    }
    return out.str();
}

ConfigOverride parse_override(std::string_view text) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
        throw Error(ErrorKind::ParseError, "override '" + std::string(text) + "' is not key=value");
    }
    return {std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1)))};
}

// ---------------------------------------------------------------- reports

namespace {

Json hyperparams_json(const HyperParams& hp) {
    Json obj = Json::object();
    for (const auto& [k, v] : config_echo(hp)) obj[k] = v;
    return obj;
}

Json optional_step(const std::optional<Step>& s) { return s ? Json(*s) : Json(nullptr); }

Json loss_json(const LossBreakdown& l) {
    return {{"l_aug", l.l_aug}, {"l_align", l.l_align}, {"l_ncl", l.l_ncl},
            {"total", l.total}, {"lambda1", l.lambda1}, {"lambda2", l.lambda2}};
}

}  // namespace

void write_session_report(std::ostream& out, const HyperParams& hp, const InputDigests& inputs,
                          const SessionReport& report, const ReportOptions& options) {
    Json config = {{"type", "config"},
                   {"format_version", kFormatVersion},
                   {"hyperparams", hyperparams_json(hp)},
                   {"seed", hp.seed},
                   {"inputs",
                    {{"stream_sha256", inputs.stream_sha256},
                     {"prototypes_sha256", inputs.prototypes_sha256},
                     {"config_sha256", inputs.config_sha256}}}};
    out << config.dump() << '\n';

    if (options.per_sample || options.trace_loss) {
        for (const auto& s : report.samples) {
            Json rec = {{"type", "sample"},
                        {"sample_id", s.sample_id},
                        {"pseudo_label", s.pseudo_label},
                        {"true_label", s.true_label ? Json(*s.true_label) : Json(nullptr)},
                        {"entropy", s.sample_entropy},
                        {"admit_outcome", to_string(s.admit_outcome)}};
            if (options.per_sample) rec["probabilities"] = s.probabilities;
            if (options.trace_loss) {
                rec["loss"] = loss_json(s.loss);
                rec["negatives_refreshed"] = s.negatives_refreshed;
            }
            out << rec.dump() << '\n';
        }
    }

    for (const auto& c : report.final_cache) {
        const Json rec = {{"type", "cache_class"},
                          {"class_id", c.class_id},
                          {"activation_count", c.activation_count},
                          {"last_update_step", optional_step(c.last_update_step)},
                          {"p_c", c.capacity.p_c},
                          {"phi", c.capacity.phi},
                          {"base", c.capacity.base},
                          {"boost", c.capacity.boost},
                          {"total", c.capacity.total},
                          {"entries", c.admission_entropies.size()},
                          {"admission_entropies", c.admission_entropies},
                          {"inactive", c.inactive}};
        out << rec.dump() << '\n';
    }

    for (const auto& n : report.final_negatives) {
        const Json rec = {{"type", "negative_pair"},
                          {"class_id", n.pair.class_id},
                          {"visual_neg", n.pair.visual_neg},
                          {"textual_neg", n.pair.textual_neg},
                          {"refreshed_at", n.pair.refreshed_at},
                          {"cos_positive", n.cos_positive},
                          {"cos_textual_neg", n.cos_textual_neg},
                          {"cos_visual_neg", n.cos_visual_neg},
                          {"loss", n.loss}};
        out << rec.dump() << '\n';
    }

    const auto& s = report.summary;
    Json per_class = Json::array();
    for (const auto& a : s.per_class_accuracy) per_class.push_back(a ? Json(*a) : Json(nullptr));
    Json trajectory = Json::array();
    for (const auto& t : report.trajectory) {
        trajectory.push_back({{"step", t.step}, {"totals", t.totals}, {"sizes", t.sizes}});
    }
    const Json summary = {{"type", "summary"},
                          {"n_samples", s.n_samples},
                          {"n_labeled", s.n_labeled},
                          {"accuracy", s.accuracy},
                          {"per_class_accuracy", per_class},
                          {"support", s.support},
                          {"tail_classes", s.tail_classes},
                          {"tail_accuracy", s.tail_accuracy},
                          {"tail_retention", s.tail_retention},
                          {"dead_classes", s.dead_classes},
                          {"never_activated", s.never_activated},
                          {"capacity_trajectory", trajectory}};
    out << summary.dump() << '\n';
}

void write_ablation_report(std::ostream& out, const AblationReport& report, const HyperParams& base, int n_seeds) {
    const auto& sp = report.spec;
    const Json header = {{"type", "ablation_header"},
                         {"format_version", kFormatVersion},
                         {"spec",
                          {{"C", sp.num_classes},
                           {"d", sp.dim},
                           {"zipf_exponent", sp.zipf_exponent},
                           {"intra_class_noise", sp.intra_class_noise},
                           {"view_jitter", sp.view_jitter},
                           {"n_samples", sp.n_samples},
                           {"textual_offset_noise", sp.textual_offset_noise},
                           {"n_views", sp.n_views},
                           {"min_angle_deg", sp.min_angle_deg},
                           {"seed", sp.seed}}},
                         {"n_seeds", n_seeds},
                         {"seeds", report.seeds},
                         {"stream_sha256", report.stream_digests},
                         {"hyperparams", hyperparams_json(base)}};
    out << header.dump() << '\n';
    auto stat = [](const std::vector<double>& xs) {
        return Json{{"mean", mean(xs)}, {"stdev", stdev(xs)}, {"per_seed", xs}};
    };
    for (const auto& c : report.configs) {
        const Json rec = {{"type", "ablation_config"},
                          {"name", c.name},
                          {"accuracy", stat(c.accuracy)},
                          {"tail_accuracy", stat(c.tail_accuracy)},
                          {"tail_retention", stat(c.tail_retention)},
                          {"dead_classes", c.dead_classes}};
        out << rec.dump() << '\n';
    }
}

std::string render_cache_table(std::istream& report, const std::string& source) {
    std::ostringstream out;
    std::string text;
    std::size_t line = 0;
    bool header_done = false;
    bool any = false;
    std::optional<Json> summary;
    while (std::getline(report, text)) {
        ++line;
        if (blank(text)) continue;
        Json obj;
        try {
            obj = Json::parse(text);
        } catch (const Json::exception& e) {
            throw Error(ErrorKind::ParseError, where(source, line) + ": " + e.what());
        }
        const auto type = obj.value("type", std::string());
        if (type == "summary") summary = obj;
        if (type != "cache_class") continue;
        if (!header_done) {
            out << std::left << std::setw(6) << "class" << std::right << std::setw(8) << "N_c" << std::setw(8)
                << "t_c" << std::setw(10) << "p_c" << std::setw(8) << "base" << std::setw(7) << "boost"
                << std::setw(7) << "total" << std::setw(9) << "entries" << std::setw(10) << "min_H" << "  state\n";
            header_done = true;
        }
        any = true;
        const auto& last = obj.at("last_update_step");
        const auto& ents = obj.at("admission_entropies");
        std::ostringstream min_h;
        if (ents.empty()) {
            min_h << "-";
        } else {
            double m = INFINITY;
            for (const auto& e : ents) m = std::min(m, e.get<double>());
            min_h << std::fixed << std::setprecision(4) << m;
        }
        std::string state = obj.at("inactive").get<bool>() ? "DEAD" : "active";
        if (obj.at("activation_count").get<std::int64_t>() == 0) state = "never-labeled";
        out << std::left << std::setw(6) << obj.at("class_id").get<std::int64_t>() << std::right << std::setw(8)
            << obj.at("activation_count").get<std::int64_t>() << std::setw(8)
            << (last.is_null() ? std::string("never") : std::to_string(last.get<std::int64_t>())) << std::setw(10)
            << std::fixed << std::setprecision(4) << obj.at("p_c").get<double>() << std::setw(8)
            << obj.at("base").get<int>() << std::setw(7) << obj.at("boost").get<int>() << std::setw(7)
            << obj.at("total").get<int>() << std::setw(9) << obj.at("entries").get<int>() << std::setw(10)
            << min_h.str() << "  " << state << '\n';
    }
    if (!any) throw Error(ErrorKind::ParseError, source + ": report has no cache_class records");
    if (summary) {
        out << "\ndead classes: " << (*summary).at("dead_classes").get<int>()
            << "   never labeled: " << (*summary).at("never_activated").get<int>()
            << "   tail retention: " << std::setprecision(3) << (*summary).at("tail_retention").get<double>()
            << "   accuracy: " << (*summary).at("accuracy").get<double>() << '\n';
    }
    return out.str();
}

}  // namespace tailtta
