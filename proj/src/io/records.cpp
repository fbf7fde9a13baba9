#include <gsopt/core/errors.hpp>
#include <gsopt/io/records.hpp>

#include <array>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace gsopt {

using nlohmann::json;

namespace {

std::string shortest(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

template <typename T>
T parse_number(const std::string &text, int line) {
    T v{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw FormatError("trace CSV: bad value '" + text + "' on line " + std::to_string(line));
    }
    return v;
}

constexpr const char *kTraceHeader = "iter,loss,psnr_probe,count,pruned,split";

} // namespace

void save_trace_csv(const std::vector<TraceRow> &trace, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    out << kTraceHeader << '\n';
    for (const TraceRow &r : trace) {
        out << r.iter << ',' << shortest(r.loss) << ',' << shortest(r.psnr_probe) << ',' << r.count << ','
            << r.pruned << ',' << r.split << '\n';
    }
    if (!out) {
        throw FormatError("failed writing '" + path + "'");
    }
}

std::vector<TraceRow> load_trace_csv(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open '" + path + "'");
    }
    std::string line;
    if (!std::getline(in, line) || line != kTraceHeader) {
        throw FormatError("trace CSV '" + path + "': missing header");
    }
    std::vector<TraceRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            f.push_back(cell);
        }
        if (f.size() != 6) {
            throw FormatError("trace CSV '" + path + "': expected 6 fields on line " + std::to_string(line_no));
        }
        TraceRow r;
        r.iter = parse_number<int>(f[0], line_no);
        r.loss = parse_number<double>(f[1], line_no);
        r.psnr_probe = parse_number<double>(f[2], line_no);
        r.count = parse_number<std::size_t>(f[3], line_no);
        r.pruned = parse_number<std::size_t>(f[4], line_no);
        r.split = parse_number<std::size_t>(f[5], line_no);
        rows.push_back(r);
    }
    return rows;
}

json eval_to_json(const EvalResult &result) {
    json doc;
    doc["mean_psnr"] = result.mean_psnr;
    doc["mean_ssim"] = result.mean_ssim;
    if (result.mean_psnr_exposure) {
        doc["mean_psnr_exposure"] = *result.mean_psnr_exposure;
        doc["mean_ssim_exposure"] = *result.mean_ssim_exposure;
    }
    doc["views"] = json::array();
    for (const ViewMetrics &v : result.views) {
        json jv = {{"camera_id", v.camera_id}, {"psnr", v.psnr}, {"ssim", v.ssim}};
        if (v.psnr_exposure) {
            jv["psnr_exposure"] = *v.psnr_exposure;
            jv["ssim_exposure"] = *v.ssim_exposure;
        }
        doc["views"].push_back(jv);
    }
    return doc;
}

namespace {

/// Binds config fields to JSON keys once, for both directions.
template <typename Config, typename Visitor>
void visit_fields(Config &c, Visitor &&v) {
    v("total_iters", c.total_iters);
    v("densify_interval", c.densify_interval);
    v("densify_start", c.densify_start);
    v("densify_end", c.densify_end);
    v("budget", c.budget);
    v("loss_lambda", c.loss_lambda);
    v("exposure_enabled", c.exposure_enabled);
    v("exposure_lr", c.exposure_lr);
    v("seed", c.seed);
    v("baseline_mode", c.baseline_mode);
    v("densify", c.densify);
    v("position_lr_final_ratio", c.position_lr_final_ratio);
    v("opacity_reset_interval", c.opacity_reset_interval);
    v("trace_interval", c.trace_interval);

    v("ablation.sparse_adam", c.ablation.sparse_adam);
    v("ablation.state_inheritance", c.ablation.state_inheritance);
    v("ablation.scaled_updates", c.ablation.scaled_updates);
    v("ablation.effective_opacity_pruning", c.ablation.effective_opacity_pruning);
    v("ablation.snr_prioritization", c.ablation.snr_prioritization);

    v("optimizer.beta1", c.optimizer.beta1);
    v("optimizer.beta2", c.optimizer.beta2);
    v("optimizer.epsilon", c.optimizer.epsilon);
    v("optimizer.lr_position", c.optimizer.groups[0].learning_rate);
    v("optimizer.lr_sizes", c.optimizer.groups[1].learning_rate);
    v("optimizer.lr_rotation", c.optimizer.groups[2].learning_rate);
    v("optimizer.lr_opacity", c.optimizer.groups[3].learning_rate);
    v("optimizer.lr_sh", c.optimizer.groups[4].learning_rate);
    v("optimizer.literal_eq3_denominator", c.optimizer.literal_eq3_denominator);
    v("optimizer.beta_min", c.optimizer.beta_min);

    v("densify.tau_prune", c.densify_settings.tau_prune);
    v("densify.max_prune_fraction", c.densify_settings.max_prune_fraction);
    v("densify.split_shift", c.densify_settings.split_shift);
    v("densify.inherit_lifespan", c.densify_settings.inherit_lifespan);
    v("densify.inherit_gradient", c.densify_settings.inherit_gradient);
    v("densify.fallback_min_opacity", c.densify_settings.fallback_min_opacity);
    v("precision.sigma_uv", c.densify_settings.precision.sigma_uv);
    v("precision.alpha", c.densify_settings.precision.alpha);

    v("vanilla.lr_position", c.vanilla.lr_position);
    v("vanilla.lr_log_size", c.vanilla.lr_log_size);
    v("vanilla.lr_rotation", c.vanilla.lr_rotation);
    v("vanilla.lr_opacity", c.vanilla.lr_opacity);
    v("vanilla.lr_sh_dc", c.vanilla.lr_sh_dc);
    v("vanilla.lr_sh_rest", c.vanilla.lr_sh_rest);
    v("vanilla.prune_min_opacity", c.vanilla_densify.prune_min_opacity);
    v("vanilla.percent_dense", c.vanilla_densify.percent_dense);
}

template <typename T>
void read_value(const json &j, const std::string &key, T &out) {
    try {
        out = j.get<T>();
    } catch (const json::exception &) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

template <typename T>
void read_value(const json &j, const std::string &key, std::optional<T> &out) {
    if (j.is_null()) {
        out.reset();
        return;
    }
    T v{};
    read_value(j, key, v);
    out = v;
}

} // namespace

json train_config_to_json(const TrainConfig &config) {
    TrainConfig resolved = config;
    resolved.densify_end = config.resolved_densify_end();
    json doc = json::object();
    visit_fields(resolved, [&](const std::string &key, const auto &value) {
        if constexpr (requires { value.has_value(); }) {
            doc[key] = value ? json(*value) : json(nullptr);
        } else {
            doc[key] = value;
        }
    });
    return doc;
}

void apply_train_config_json(const json &doc, TrainConfig &config) {
    if (!doc.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    std::set<std::string> known;
    visit_fields(config, [&](const std::string &key, auto &value) {
        known.insert(key);
        if (doc.contains(key)) {
            read_value(doc.at(key), key, value);
        }
    });
    for (const auto &item : doc.items()) {
        if (!known.count(item.key())) {
            throw ConfigError("unknown config key '" + item.key() + "'");
        }
    }
}

void write_json(const json &doc, const std::string &path) {
    std::ofstream out(path);
    if (!out) {
        throw FormatError("cannot open '" + path + "' for writing");
    }
    out << doc.dump(2) << '\n';
}

json read_json(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError("cannot open '" + path + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error &e) {
        throw FormatError("'" + path + "': " + e.what());
    }
}

} // namespace gsopt
