#include "nldiag/report.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace nldiag {

namespace {

std::ofstream open_csv(const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + file.string() + "'");
    return out;
}

/// Quotes a CSV field when it holds a separator, quote or line break.
std::string field(const std::string& text) {
    if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

template <typename T, typename F>
std::string joined(const std::vector<T>& items, F&& render) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ' ';
        out += render(items[i]);
    }
    return out;
}

}  // namespace

std::string format_number(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

nlohmann::json to_json(const RunManifest& manifest) {
    return {{"command", manifest.command},
            {"argv", manifest.argv},
            {"config", manifest.config},
            {"input_digests", manifest.input_digests},
            {"version", manifest.version}};
}

nlohmann::json to_json(const StepperConfig& config) {
    nlohmann::json diag = nlohmann::json::array();
    for (EigenMethod m : config.diag_mode) diag.push_back(to_string(m));
    return {{"order", config.order},
            {"dt", config.dt},
            {"t_end", config.t_end},
            {"tol", config.solver.tol},
            {"max_iter", config.solver.max_iter},
            {"alpha", config.solver.alpha},
            {"diag", diag},
            {"localize_on_flags", config.localize_on_flags},
            {"localize_threshold", config.localize_threshold},
            {"cluster_radius", config.anomaly.cluster_radius},
            {"anomaly_threshold", config.anomaly.anomaly_threshold},
            {"unit_circle_threshold", config.anomaly.unit_circle_threshold},
            {"period_doubling_real_cut", config.anomaly.period_doubling_real_cut}};
}

void write_run_reports(const std::filesystem::path& dir, const RunReport& report) {
    std::filesystem::create_directories(dir);
    {
        auto out = open_csv(dir / "steps.csv");
        out << "t";
        for (const std::string& name : report.unknown_names) out << ',' << field(name);
        out << ",iterations,status\n";
        for (const StepRecord& rec : report.steps) {
            out << format_number(rec.t);
            for (Index i = 0; i < rec.x.size(); ++i) out << ',' << format_number(rec.x(i));
            out << ',' << rec.trace.steps() << ',' << to_string(rec.status) << '\n';
        }
    }
    {
        auto out = open_csv(dir / "eigs.csv");
        out << "step,t,method,re,im\n";
        for (const StepRecord& rec : report.steps) {
            for (const auto& [method, eig] : rec.eigen) {
                if (!eig.usable) continue;
                for (const Complex& l : eig.eigenvalues) {
                    out << rec.index << ',' << format_number(rec.t) << ',' << to_string(method) << ','
                        << format_number(l.real()) << ',' << format_number(l.imag()) << '\n';
                }
            }
        }
    }
    {
        auto out = open_csv(dir / "anomalies.csv");
        out << "step,t,method,flags,leading_abs_lambda\n";
        for (const StepRecord& rec : report.steps) {
            for (const auto& [method, anomaly] : rec.anomalies) {
                if (!anomaly.flags.any() && anomaly.outlier_indices.empty()) continue;
                out << rec.index << ',' << format_number(rec.t) << ',' << to_string(method) << ','
                    << field(anomaly.flags.str()) << ',' << format_number(anomaly.leading_magnitude) << '\n';
            }
        }
    }
    {
        auto out = open_csv(dir / "localization.csv");
        out << "step,method,outlier_index,flagged_rows,flagged_components,no_dominant_peak\n";
        for (const StepRecord& rec : report.steps) {
            for (const OutlierLocalization& loc : rec.localization) {
                const LocalizationResult& r = loc.result;
                out << rec.index << ',' << to_string(loc.method) << ',' << loc.outlier_index << ','
                    << field(joined(r.flagged_rows, [](Index i) { return std::to_string(i); })) << ','
                    << field(joined(r.flagged_components, [](const std::string& s) { return s; })) << ','
                    << (r.no_dominant_peak ? "true" : "false") << '\n';
            }
        }
    }
    {
        auto out = open_csv(dir / "crossings.csv");
        out << "step,t,method,kind,edge\n";
        for (const TaggedCrossing& c : report.crossings) {
            const long idx = c.event.step_index;
            double t = 0.0;
            if (idx >= 1 && idx <= static_cast<long>(report.steps.size())) t = report.steps[idx - 1].t;
            out << idx << ',' << format_number(t) << ',' << to_string(c.method) << ',' << to_string(c.event.kind) << ','
                << (c.event.on ? "on" : "off") << '\n';
        }
    }
}

void write_grid(const std::filesystem::path& dir, const std::vector<SweepCell>& cells) {
    std::filesystem::create_directories(dir);
    auto out = open_csv(dir / "grid.csv");
    out << "t,value,order,leading_abs_lambda\n";
    for (const SweepCell& c : cells) {
        out << format_number(c.t) << ',' << format_number(c.value) << ',' << c.order << ','
            << (c.leading_magnitude ? format_number(*c.leading_magnitude) : std::string("FAIL")) << '\n';
    }
}

void write_spectrum(const std::filesystem::path& file, const std::vector<Complex>& eigenvalues) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    auto out = open_csv(file);
    out << "re,im\n";
    for (const Complex& l : eigenvalues) out << format_number(l.real()) << ',' << format_number(l.imag()) << '\n';
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest in '" + dir.string() + "'");
    out << to_json(manifest).dump(2) << '\n';
}

}  // namespace nldiag
