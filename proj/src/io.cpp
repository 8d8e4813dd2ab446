#include "phdae/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace phdae::io {

namespace {

using nlohmann::json;

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

std::string format_double(double v) {
    // Shortest representation that round-trips; fall back widening the
    // precision until the parsed value matches bit-for-bit.
    for (int prec = 1; prec <= 17; ++prec) {
        std::ostringstream os;
        os.precision(prec);
        os << v;
        const std::string s = os.str();
        if (std::stod(s) == v) return s;
    }
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

Mat read_matrix_market(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open matrix market file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("empty matrix market file");
    std::istringstream head(line);
    std::string banner, object, fmt, field, symmetry;
    head >> banner >> object >> fmt >> field >> symmetry;
    if (banner != "%%MatrixMarket" || lower(object) != "matrix")
        throw InvalidInput("not a MatrixMarket matrix file: " + path.string());
    fmt = lower(fmt);
    field = lower(field);
    symmetry = lower(symmetry);
    if (field != "real" && field != "integer")
        throw InvalidInput("only real matrix market files supported");

    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '%') break;
    }
    std::istringstream sizes(line);
    Index rows = 0, cols = 0;
    sizes >> rows >> cols;

    Mat a = Mat::Zero(rows, cols);
    if (fmt == "array") {
        // column-major dense listing; symmetric/skew store lower triangle
        for (Index j = 0; j < cols; ++j) {
            const Index i0 = (symmetry == "general") ? 0 : j;
            for (Index i = i0; i < rows; ++i) {
                double v;
                if (!(in >> v)) throw InvalidInput("truncated matrix market array data");
                a(i, j) = v;
                if (symmetry == "symmetric" && i != j) a(j, i) = v;
                if (symmetry == "skew-symmetric" && i != j) a(j, i) = -v;
            }
        }
    } else if (fmt == "coordinate") {
        Index nnz = 0;
        sizes >> nnz;
        for (Index k = 0; k < nnz; ++k) {
            Index i, j;
            double v;
            if (!(in >> i >> j >> v)) throw InvalidInput("truncated matrix market data");
            a(i - 1, j - 1) = v;
            if (symmetry == "symmetric" && i != j) a(j - 1, i - 1) = v;
            if (symmetry == "skew-symmetric" && i != j) a(j - 1, i - 1) = -v;
        }
    } else {
        throw InvalidInput("unsupported matrix market format: " + fmt);
    }
    return a;
}

void write_matrix_market(const Mat& a, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write matrix market file " + path.string());
    out << "%%MatrixMarket matrix array real general\n";
    out << a.rows() << " " << a.cols() << "\n";
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i) out << format_double(a(i, j)) << "\n";
}

namespace {

json matrix_to_json(const Mat& a) {
    json rows = json::array();
    for (Index i = 0; i < a.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat matrix_from_json(const json& j, const std::filesystem::path& base, Index rows,
                     Index cols, const std::string& name) {
    Mat a;
    if (j.is_string()) {
        a = read_matrix_market(base / j.get<std::string>());
    } else if (j.is_array()) {
        const Index r = static_cast<Index>(j.size());
        const Index c = r > 0 ? static_cast<Index>(j.at(0).size()) : 0;
        a.resize(r, c);
        for (Index i = 0; i < r; ++i) {
            const auto& row = j.at(static_cast<std::size_t>(i));
            if (static_cast<Index>(row.size()) != c)
                throw InvalidInput("envelope matrix " + name + " is ragged");
            for (Index k = 0; k < c; ++k) a(i, k) = row.at(static_cast<std::size_t>(k));
        }
    } else {
        throw InvalidInput("envelope matrix " + name + " must be rows or a .mtx path");
    }
    if (a.rows() != rows || a.cols() != cols)
        throw InvalidInput("envelope matrix " + name + " has shape " +
                           std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                           ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    return a;
}

}  // namespace

LtiPhDae load_envelope(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open envelope " + path.string());
    json doc = json::parse(in);
    const Index n = doc.at("n").get<Index>();
    const Index ell = doc.at("ell").get<Index>();
    const Index m = doc.at("m").get<Index>();
    const auto& mats = doc.at("matrices");
    const auto base = path.parent_path();
    return LtiPhDae::general(matrix_from_json(mats.at("E"), base, ell, n, "E"),
                             matrix_from_json(mats.at("J"), base, ell, ell, "J"),
                             matrix_from_json(mats.at("R"), base, ell, ell, "R"),
                             matrix_from_json(mats.at("Q"), base, ell, n, "Q"),
                             matrix_from_json(mats.at("G"), base, ell, m, "G"),
                             matrix_from_json(mats.at("P"), base, ell, m, "P"),
                             matrix_from_json(mats.at("S"), base, m, m, "S"),
                             matrix_from_json(mats.at("N"), base, m, m, "N"));
}

void save_envelope(const LtiPhDae& sys, const std::filesystem::path& path,
                   const EnvelopeOptions& opt) {
    json doc;
    doc["n"] = sys.n();
    doc["ell"] = sys.ell();
    doc["m"] = sys.m();
    json mats;
    const std::pair<const char*, const Mat*> entries[] = {
        {"E", &sys.E}, {"J", &sys.J}, {"R", &sys.R}, {"Q", &sys.Q},
        {"G", &sys.G}, {"P", &sys.P}, {"S", &sys.S}, {"N", &sys.N}};
    for (const auto& [name, mat] : entries) {
        if (opt.matrices_as_mtx) {
            const std::string fname = path.stem().string() + "_" + name + ".mtx";
            write_matrix_market(*mat, path.parent_path() / fname);
            mats[name] = fname;
        } else {
            mats[name] = matrix_to_json(*mat);
        }
    }
    doc["matrices"] = std::move(mats);
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write envelope " + path.string());
    out << doc.dump(2) << "\n";
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write csv " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i)
        out << header[i] << (i + 1 < header.size() ? "," : "");
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << format_double(row[i]) << (i + 1 < row.size() ? "," : "");
        out << "\n";
    }
}

}  // namespace phdae::io
