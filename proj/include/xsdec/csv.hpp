#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "xsdec/evidence.hpp"
#include "xsdec/sampler.hpp"
#include "xsdec/spectrum.hpp"

namespace xsdec {

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string rstrip(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n' || s.back() == ' ' || s.back() == '\t')) {
        s.pop_back();
    }
    return s;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, const std::string& path, std::size_t line_no) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    while (ptr < end && (*ptr == ' ' || *ptr == '\t')) ++ptr;
    if (ec != std::errc{} || ptr != end) {
        throw parse_error(path + ": line " + std::to_string(line_no) + ": bad number '" + s + "'");
    }
    return v;
}

} // namespace detail

// Write-to-temporary-then-rename so readers never observe a partial file.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw parse_error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw parse_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Dataset files: header `energy,intensity`, one point per row.
// ---------------------------------------------------------------------------

inline Dataset parse_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw invalid_input("cannot open dataset file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw invalid_input("empty dataset file " + path.string());
    if (detail::rstrip(line) != "energy,intensity") {
        throw parse_error(path.string() + ": line 1: expected header 'energy,intensity'");
    }
    Dataset data;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = detail::rstrip(line);
        if (stripped.empty()) continue;
        auto fields = detail::split_csv(stripped);
        if (fields.size() != 2) {
            throw parse_error(path.string() + ": line " + std::to_string(line_no) +
                              ": expected 2 fields, got " + std::to_string(fields.size()));
        }
        data.energy.push_back(detail::parse_double(fields[0], path.string(), line_no));
        data.intensity.push_back(detail::parse_double(fields[1], path.string(), line_no));
    }
    if (data.size() == 0) throw invalid_input(path.string() + ": dataset has no points");
    return data;
}

inline void write_dataset(const std::filesystem::path& path, const Dataset& data) {
    std::ostringstream out;
    out << "energy,intensity\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        out << detail::format_double(data.energy[i]) << ','
            << detail::format_double(data.intensity[i]) << '\n';
    }
    atomic_write(path, out.str());
}

// ---------------------------------------------------------------------------
// Sample records: mcs, replica, E_N, then the flattened parameter columns.
// Replica indices are 1-based in the file.
// ---------------------------------------------------------------------------

inline void write_record_csv(const std::filesystem::path& path, const SampleRecord& rec) {
    std::ostringstream out;
    out << "mcs,replica,E_N";
    bool with_theta = false;
    for (const auto& t : rec.theta) {
        if (!t.empty()) with_theta = true;
    }
    if (with_theta) {
        for (const std::string& name : rec.param_names) out << ',' << name;
    }
    out << '\n';
    for (std::size_t m = 0; m < rec.mcs.size(); ++m) {
        for (int l = 0; l < rec.L; ++l) {
            out << rec.mcs[m] << ',' << (l + 1) << ',' << detail::format_double(rec.e_n[l][m]);
            if (with_theta) {
                const double* flat = rec.theta[l].data() + m * rec.n_params;
                for (int j = 0; j < rec.n_params; ++j) {
                    out << ',' << detail::format_double(flat[j]);
                }
            }
            out << '\n';
        }
    }
    atomic_write(path, out.str());
}

// Subset of a SampleRecord reconstructed from a file; enough for diagnostics
// and round-trip checks.
struct RecordCsv {
    std::vector<std::string> param_names; // empty when the file has no theta columns
    std::vector<long> mcs;
    std::vector<std::vector<double>> e_n;   // [replica][sample]
    std::vector<std::vector<double>> theta; // [replica][sample * n_params]
};

inline RecordCsv read_record_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw invalid_input("cannot open record file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw invalid_input("empty record file " + path.string());
    auto header = detail::split_csv(detail::rstrip(line));
    if (header.size() < 3 || header[0] != "mcs" || header[1] != "replica" || header[2] != "E_N") {
        throw parse_error(path.string() + ": line 1: expected header 'mcs,replica,E_N,...'");
    }
    RecordCsv rec;
    rec.param_names.assign(header.begin() + 3, header.end());
    std::size_t n_params = rec.param_names.size();
    std::size_t line_no = 1;
    long last_mcs = -1;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = detail::rstrip(line);
        if (stripped.empty()) continue;
        auto fields = detail::split_csv(stripped);
        if (fields.size() != 3 + n_params) {
            throw parse_error(path.string() + ": line " + std::to_string(line_no) +
                              ": wrong field count");
        }
        long mcs = static_cast<long>(detail::parse_double(fields[0], path.string(), line_no));
        std::size_t replica =
            static_cast<std::size_t>(detail::parse_double(fields[1], path.string(), line_no));
        if (replica < 1) {
            throw parse_error(path.string() + ": line " + std::to_string(line_no) +
                              ": replica index must be positive");
        }
        if (rec.e_n.size() < replica) {
            rec.e_n.resize(replica);
            rec.theta.resize(replica);
        }
        if (mcs != last_mcs) {
            rec.mcs.push_back(mcs);
            last_mcs = mcs;
        }
        rec.e_n[replica - 1].push_back(detail::parse_double(fields[2], path.string(), line_no));
        for (std::size_t j = 0; j < n_params; ++j) {
            rec.theta[replica - 1].push_back(
                detail::parse_double(fields[3 + j], path.string(), line_no));
        }
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Fitted-curve table: energy, full model, then each additive component.
// ---------------------------------------------------------------------------

inline void write_curves_csv(const std::filesystem::path& path, const ModelSpec& model,
                             const SpectralParams& params, const std::vector<double>& energies) {
    std::ostringstream out;
    out << "energy,model,edge,white_line";
    auto peak_label = [&](int pop, int idx) {
        if (model.regime == Regime::Conventional) return "peak." + std::to_string(idx);
        return (pop == 0 ? "below." : "above.") + std::to_string(idx);
    };
    for (int k = 0; k < model.peaks.k1; ++k) out << ',' << peak_label(0, k);
    for (int k = 0; k < model.peaks.k2; ++k) out << ',' << peak_label(1, k);
    out << '\n';
    for (double e : energies) {
        StepParams edge_only = params.step;
        edge_only.A = 0.0;
        double edge = evaluate_step(edge_only, e);
        double wl = gaussian_fwhm(params.step.A, params.step.E0 + params.step.DeltaE,
                                  params.step.omega, e);
        out << detail::format_double(e) << ',' << detail::format_double(evaluate_model(params, e))
            << ',' << detail::format_double(edge) << ',' << detail::format_double(wl);
        for (const auto* pop : {&params.below, &params.above}) {
            for (const Peak& pk : *pop) {
                out << ','
                    << detail::format_double(
                           gaussian_fwhm(pk.F, params.step.E0 + pk.dE, pk.W, e));
            }
        }
        out << '\n';
    }
    atomic_write(path, out.str());
}

// ---------------------------------------------------------------------------
// Evidence tables, long form: K1, K2, l, b, logZtilde, F.
// ---------------------------------------------------------------------------

inline void write_evidence_csv(const std::filesystem::path& path, const EvidenceTable& table) {
    std::ostringstream out;
    out << "K1,K2,l,b,logZtilde,F\n";
    for (const EvidenceRow& row : table.rows) {
        for (int l = 0; l < table.ladder.L; ++l) {
            out << row.peaks.k1 << ',' << row.peaks.k2 << ',' << (l + 1) << ','
                << detail::format_double(table.ladder.b[l]) << ','
                << detail::format_double(row.log_ztilde[l]) << ','
                << detail::format_double(row.f[l]) << '\n';
        }
    }
    atomic_write(path, out.str());
}

// Generic numeric table, used to re-parse emitted artifacts.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw invalid_input("csv table has no column '" + name + "'");
    }
};

inline CsvTable read_csv_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw invalid_input("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw invalid_input("empty file " + path.string());
    CsvTable table;
    table.header = detail::split_csv(detail::rstrip(line));
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = detail::rstrip(line);
        if (stripped.empty()) continue;
        auto fields = detail::split_csv(stripped);
        if (fields.size() != table.header.size()) {
            throw parse_error(path.string() + ": line " + std::to_string(line_no) +
                              ": wrong field count");
        }
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) {
            row.push_back(detail::parse_double(f, path.string(), line_no));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

} // namespace xsdec
