#include "ncrank/pencil.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ncrank {

using nlohmann::json;

HermitianMatrix::HermitianMatrix(Matrix m) {
    require_square_finite(m, "HermitianMatrix");
    if (!is_hermitian(m))
        throw ValidationError("HermitianMatrix: input is not Hermitian within tolerance");
    m_ = hermitian_part(m);
}

LinearPencil::LinearPencil(std::vector<HermitianMatrix> coeffs,
                           std::optional<HermitianMatrix> mean)
    : coeffs_(std::move(coeffs)), mean_(std::move(mean)) {
    if (coeffs_.empty()) throw ValidationError("LinearPencil: needs at least one coefficient");
    dim_ = coeffs_.front().dim();
    for (std::size_t i = 1; i < coeffs_.size(); ++i)
        if (coeffs_[i].dim() != dim_)
            throw ValidationError("LinearPencil: coefficient " + std::to_string(i + 1) +
                                  " has dimension " + std::to_string(coeffs_[i].dim()) +
                                  ", expected " + std::to_string(dim_));
    if (mean_ && mean_->dim() != dim_)
        throw ValidationError("LinearPencil: mean has dimension " + std::to_string(mean_->dim()) +
                              ", expected " + std::to_string(dim_));
}

Matrix LinearPencil::mean_or_zero() const {
    return mean_ ? mean_->get() : Matrix(Matrix::Zero(dim_, dim_));
}

bool LinearPencil::is_zero() const {
    for (const auto& a : coeffs_)
        if (a.get().cwiseAbs().maxCoeff() != 0.0) return false;
    return true;
}

GeneralPencil::GeneralPencil(std::vector<Matrix> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) throw ValidationError("GeneralPencil: needs at least one coefficient");
    dim_ = coeffs_.front().rows();
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        require_square_finite(coeffs_[i], "GeneralPencil coefficient");
        if (coeffs_[i].rows() != dim_)
            throw ValidationError("GeneralPencil: coefficient " + std::to_string(i + 1) +
                                  " has dimension " + std::to_string(coeffs_[i].rows()) +
                                  ", expected " + std::to_string(dim_));
    }
}

LinearPencil hermitize(const GeneralPencil& p) {
    const Index n = p.dim();
    std::vector<HermitianMatrix> blocks;
    blocks.reserve(p.coeffs().size());
    for (const Matrix& a : p.coeffs()) {
        Matrix h = Matrix::Zero(2 * n, 2 * n);
        h.block(0, n, n, n) = a;
        h.block(n, 0, n, n) = a.adjoint();
        blocks.emplace_back(std::move(h));
    }
    return LinearPencil(std::move(blocks));
}

namespace {

// Maps a byte offset from nlohmann's parse_error into a line/column pair.
std::string position_of(std::string_view text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

Complex parse_entry(const json& e, const std::string& where) {
    if (!e.is_object() || !e.contains("re") || !e.contains("im"))
        throw ValidationError(where + ": entry must be an object {\"re\":..,\"im\":..}");
    const json& re = e["re"];
    const json& im = e["im"];
    if (!re.is_number() || !im.is_number())
        throw ValidationError(where + ": re/im must be numbers");
    return Complex(re.get<double>(), im.get<double>());
}

Matrix parse_block(const json& block, Index n, const std::string& where) {
    if (!block.is_array() || static_cast<Index>(block.size()) != n)
        throw ValidationError(where + ": expected " + std::to_string(n) + " rows, got " +
                              std::to_string(block.is_array() ? block.size() : 0));
    Matrix m(n, n);
    for (Index i = 0; i < n; ++i) {
        const json& row = block[static_cast<std::size_t>(i)];
        const std::string rwhere = where + "[" + std::to_string(i + 1) + "]";
        if (!row.is_array() || static_cast<Index>(row.size()) != n)
            throw ValidationError(rwhere + ": expected " + std::to_string(n) + " entries, got " +
                                  std::to_string(row.is_array() ? row.size() : 0));
        for (Index j = 0; j < n; ++j)
            m(i, j) = parse_entry(row[static_cast<std::size_t>(j)],
                                  rwhere + "[" + std::to_string(j + 1) + "]");
    }
    if (!all_finite(m)) throw ValidationError(where + ": non-finite entry");
    return m;
}

}  // namespace

ParsedPencil parse_pencil(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError("pencil file: malformed JSON at " +
                              position_of(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
    }
    if (!doc.is_object()) throw ValidationError("pencil file: top level must be an object");
    for (const char* key : {"n", "N", "coeffs"})
        if (!doc.contains(key))
            throw ValidationError(std::string("pencil file: missing field \"") + key + "\"");
    if (!doc["n"].is_number_integer() || !doc["N"].is_number_integer())
        throw ValidationError("pencil file: n and N must be integers");
    const long long nv = doc["n"].get<long long>();
    const long long dim = doc["N"].get<long long>();
    if (nv < 1) throw ValidationError("pencil file: n must be >= 1");
    if (dim < 1) throw ValidationError("pencil file: N must be >= 1");

    const json& coeffs = doc["coeffs"];
    if (!coeffs.is_array() || static_cast<long long>(coeffs.size()) != nv)
        throw ValidationError("pencil file: coeffs must be an array of n = " + std::to_string(nv) +
                              " blocks, got " +
                              std::to_string(coeffs.is_array() ? coeffs.size() : 0));

    std::vector<Matrix> raw;
    raw.reserve(static_cast<std::size_t>(nv));
    bool all_herm = true;
    for (long long k = 0; k < nv; ++k) {
        Matrix a = parse_block(coeffs[static_cast<std::size_t>(k)], static_cast<Index>(dim),
                               "coeffs[" + std::to_string(k + 1) + "]");
        all_herm = all_herm && is_hermitian(a);
        raw.push_back(std::move(a));
    }

    std::optional<Matrix> mean;
    if (doc.contains("mean") && !doc["mean"].is_null())
        mean = parse_block(doc["mean"], static_cast<Index>(dim), "mean");

    if (!all_herm) {
        if (mean)
            throw ValidationError(
                "pencil file: a mean block requires Hermitian coefficients; "
                "the general (non-Hermitian) form carries no constant term");
        return GeneralPencil(std::move(raw));
    }

    std::vector<HermitianMatrix> herm;
    herm.reserve(raw.size());
    for (auto& a : raw) herm.emplace_back(std::move(a));
    std::optional<HermitianMatrix> hmean;
    if (mean) {
        if (!is_hermitian(*mean))
            throw ValidationError("pencil file: mean block is not Hermitian within tolerance");
        hmean.emplace(std::move(*mean));
    }
    return LinearPencil(std::move(herm), std::move(hmean));
}

ParsedPencil load_pencil(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open pencil file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_pencil(buf.str());
}

LinearPencil as_hermitian(const ParsedPencil& p, bool* was_hermitized) {
    if (const auto* lin = std::get_if<LinearPencil>(&p)) {
        if (was_hermitized) *was_hermitized = false;
        return *lin;
    }
    if (was_hermitized) *was_hermitized = true;
    return hermitize(std::get<GeneralPencil>(p));
}

CovarianceMap::CovarianceMap(LinearPencil pencil) : pencil_(std::move(pencil)) {
    const Index n = pencil_.dim();
    eta_id_ = Matrix::Zero(n, n);
    for (const auto& a : pencil_.coeffs()) eta_id_ += a.get() * a.get();
    norm_ = max_eigenvalue_hermitian(eta_id_);
    if (norm_ < 0.0) norm_ = 0.0;  // eta(1) is PSD; guard fp noise on the zero pencil
}

Matrix CovarianceMap::apply(const Matrix& b) const {
    if (b.rows() != dim() || b.cols() != dim())
        throw ValidationError("eta: argument has dimension " + std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()) + ", expected " + std::to_string(dim()));
    Matrix out = Matrix::Zero(dim(), dim());
    Matrix tmp(dim(), dim());
    apply_into(b, out, tmp);
    return out;
}

void CovarianceMap::apply_into(const Matrix& b, Matrix& out, Matrix& tmp) const {
    out.setZero();
    for (const auto& a : pencil_.coeffs()) {
        tmp.noalias() = a.get() * b;
        out.noalias() += tmp * a.get();
    }
}

}  // namespace ncrank
