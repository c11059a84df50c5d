#include "shiftuq/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#ifndef SHIFTUQ_VERSION
#define SHIFTUQ_VERSION "0.0.0"
#endif

namespace shiftuq::report {

using harness::kMetricNames;
using harness::MetricVector;
using harness::ReportRow;

std::string library_version() { return SHIFTUQ_VERSION; }

std::string format_number(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void csv_line(std::ostringstream& out, const ReportRow& row, const std::string& repeat,
              const std::string& status, const MetricVector* values, const std::string& message) {
    out << kSchemaVersion << ',' << csv_field(row.dataset) << ',' << csv_field(row.method) << ','
        << format_number(row.alpha) << ',' << repeat << ',' << csv_field(status);
    for (std::size_t c = 0; c < kMetricNames.size(); ++c)
        out << ',' << (values ? format_number((*values)[c]) : "");
    out << ',' << csv_field(message) << '\n';
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("error writing " + path.string());
}

nlohmann::json number(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_from(const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

nlohmann::json metric_object(const MetricVector& v) {
    nlohmann::json o = nlohmann::json::object();
    for (std::size_t c = 0; c < kMetricNames.size(); ++c) o[kMetricNames[c]] = number(v[c]);
    return o;
}

MetricVector metric_from_object(const nlohmann::json& o) {
    MetricVector v{};
    for (std::size_t c = 0; c < kMetricNames.size(); ++c) v[c] = number_from(o.at(kMetricNames[c]));
    return v;
}

}  // namespace

std::string results_csv(const std::vector<ReportRow>& rows) {
    std::ostringstream out;
    out << "schema_version,dataset,method,alpha,repeat,status";
    for (const char* name : kMetricNames) out << ',' << name;
    out << ",message\n";
    for (const auto& row : rows) {
        for (const auto& r : row.repeats) {
            const MetricVector v = harness::metric_vector(r.metrics);
            csv_line(out, row, std::to_string(r.index), r.ok ? "ok" : "failed", r.ok ? &v : nullptr,
                     r.message);
        }
        csv_line(out, row, "mean", row.summary.status, &row.summary.mean, row.summary.message);
        csv_line(out, row, "std", row.summary.status, &row.summary.std, row.summary.message);
    }
    return out.str();
}

std::string sweep_csv(const std::vector<harness::SweepPoint>& points) {
    std::ostringstream out;
    out << "level,method,coverage\n";
    for (const auto& p : points)
        out << p.level << ',' << csv_field(p.method) << ',' << format_number(p.coverage) << '\n';
    return out.str();
}

nlohmann::json to_json(const std::vector<ReportRow>& rows, const std::string& config_echo,
                       const std::vector<harness::SweepPoint>* sweep) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["library_version"] = library_version();
    j["config_echo"] = config_echo;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : rows) {
        nlohmann::json r;
        r["dataset"] = row.dataset;
        r["method"] = row.method;
        r["alpha"] = row.alpha;
        r["repeats"] = nlohmann::json::array();
        for (const auto& rep : row.repeats) {
            nlohmann::json x;
            x["index"] = rep.index;
            x["members"] = rep.members;
            x["ok"] = rep.ok;
            x["message"] = rep.message;
            x["metrics"] = metric_object(harness::metric_vector(rep.metrics));
            r["repeats"].push_back(std::move(x));
        }
        r["summary"] = {{"n", row.summary.n},
                        {"status", row.summary.status},
                        {"message", row.summary.message},
                        {"mean", metric_object(row.summary.mean)},
                        {"std", metric_object(row.summary.std)}};
        j["rows"].push_back(std::move(r));
    }
    if (sweep) {
        j["sweep"] = nlohmann::json::array();
        for (const auto& p : *sweep)
            j["sweep"].push_back({{"level", p.level}, {"method", p.method}, {"coverage", number(p.coverage)}});
    }
    return j;
}

std::vector<ReportRow> rows_from_json(const nlohmann::json& j) {
    if (j.at("schema_version").get<int>() != kSchemaVersion)
        throw std::invalid_argument("unsupported results schema version");
    std::vector<ReportRow> rows;
    for (const auto& r : j.at("rows")) {
        ReportRow row;
        row.dataset = r.at("dataset").get<std::string>();
        row.method = r.at("method").get<std::string>();
        row.alpha = r.at("alpha").get<double>();
        for (const auto& x : r.at("repeats")) {
            harness::RepeatResult rep;
            rep.index = x.at("index").get<std::size_t>();
            rep.members = x.at("members").get<std::vector<std::size_t>>();
            rep.ok = x.at("ok").get<bool>();
            rep.message = x.at("message").get<std::string>();
            rep.metrics = harness::metrics_from_vector(metric_from_object(x.at("metrics")), row.alpha);
            row.repeats.push_back(std::move(rep));
        }
        const auto& s = r.at("summary");
        row.summary.n = s.at("n").get<std::size_t>();
        row.summary.status = s.at("status").get<std::string>();
        row.summary.message = s.at("message").get<std::string>();
        row.summary.mean = metric_from_object(s.at("mean"));
        row.summary.std = metric_from_object(s.at("std"));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<harness::SweepPoint> sweep_from_json(const nlohmann::json& j) {
    std::vector<harness::SweepPoint> points;
    if (!j.contains("sweep")) return points;
    for (const auto& p : j.at("sweep"))
        points.push_back({p.at("level").get<int>(), p.at("method").get<std::string>(),
                          number_from(p.at("coverage"))});
    return points;
}

void emit_report(const std::vector<ReportRow>& rows, const std::filesystem::path& dir,
                 const std::string& config_echo, const std::vector<harness::SweepPoint>* sweep) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    write_file(dir / "results.csv", results_csv(rows));
    write_file(dir / "results.json", to_json(rows, config_echo, sweep).dump(2) + "\n");
    if (sweep) write_file(dir / "shiftsweep.csv", sweep_csv(*sweep));
}

std::string summary_table(const std::vector<ReportRow>& rows) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-16s %-28s %-17s %-17s %-9s %-9s %s\n", "dataset", "method",
                  "coverage", "pred. rate", "val MAE", "val len", "status");
    out << line;
    for (const auto& r : rows) {
        const auto& m = r.summary.mean;
        const auto& s = r.summary.std;
        std::snprintf(line, sizeof line, "%-16s %-28s %.4f +- %.4f  %.4f +- %.4f  %-9.4f %-9.4f %s\n",
                      r.dataset.c_str(), r.method.c_str(), m[0], s[0], m[1], s[1], m[2], m[3],
                      r.summary.status.c_str());
        out << line;
    }
    return out.str();
}

}  // namespace shiftuq::report
