#include "ccc/checkpoint.hpp"

#include "ccc/errors.hpp"

#include <array>
#include <bit>
#include <fstream>

namespace ccc {

namespace {

constexpr std::array<char, 8> kMagic{'C', 'C', 'C', 'M', 'O', 'D', 'E', 'L'};

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
        if (!out_)
            throw LoadError(path.string(), "cannot open for writing");
    }

    void u64(std::uint64_t v) {
        std::array<char, 8> bytes;
        for (std::size_t i = 0; i < 8; ++i)
            bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
        out_.write(bytes.data(), bytes.size());
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void size(std::size_t v) { u64(static_cast<std::uint64_t>(v)); }
    void matrix(const MatrixXd& m) {
        size(static_cast<std::size_t>(m.rows()));
        size(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.size(); ++i)
            f64(m.data()[i]);
    }
    void blocks(const std::vector<MatrixXd>& v) {
        size(v.size());
        for (const auto& m : v)
            matrix(m);
    }
    void finish() {
        out_.flush();
        if (!out_)
            throw LoadError(path_.string(), "write failed");
    }

    std::ofstream& raw() { return out_; }

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), name_(path.string()) {
        if (!in_)
            throw LoadError(name_, "cannot open checkpoint");
    }

    std::uint64_t u64() {
        std::array<unsigned char, 8> bytes;
        in_.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
        if (!in_)
            throw LoadError(name_, "truncated checkpoint");
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::size_t size(std::size_t limit = std::size_t{1} << 32) {
        const std::uint64_t v = u64();
        if (v > limit)
            throw LoadError(name_, "corrupt checkpoint: size field " + std::to_string(v));
        return static_cast<std::size_t>(v);
    }
    MatrixXd matrix() {
        const auto rows = static_cast<Eigen::Index>(size());
        const auto cols = static_cast<Eigen::Index>(size());
        if (rows * cols > (Eigen::Index{1} << 31))
            throw LoadError(name_, "corrupt checkpoint: matrix too large");
        MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i)
            m.data()[i] = f64();
        return m;
    }
    std::vector<MatrixXd> blocks() {
        std::vector<MatrixXd> v(size());
        for (auto& m : v)
            m = matrix();
        return v;
    }
    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof())
            throw LoadError(name_, "trailing bytes after checkpoint");
    }

    std::ifstream& raw() { return in_; }
    const std::string& name() const { return name_; }

private:
    std::ifstream in_;
    std::string name_;
};

void expect_blocks(const Reader& in, const std::vector<MatrixXd>& v, std::size_t count, Eigen::Index rows,
                   Eigen::Index cols, const char* what) {
    if (v.size() != count)
        throw LoadError(in.name(), std::string("checkpoint ") + what + " has the wrong block count");
    for (const auto& m : v)
        if (m.rows() != rows || m.cols() != cols)
            throw LoadError(in.name(), std::string("checkpoint ") + what + " has the wrong block shape");
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    Writer out(path);
    out.raw().write(kMagic.data(), kMagic.size());
    out.u64(kCheckpointVersion);

    const Hyperparams& hp = c.hp;
    for (double v : {hp.alpha, hp.beta, hp.gamma, hp.rho, hp.eta, hp.theta, hp.eps_omega, hp.tol})
        out.f64(v);
    out.size(hp.max_iters);
    out.size(hp.max_halvings);
    out.u64(hp.spatial ? 1 : 0);
    out.size(c.lag);

    const ModelState& s = c.state;
    for (std::size_t v : {s.regions, s.slots, s.types, s.features, s.pairs})
        out.size(v);
    for (const auto* b : {&s.P, &s.Q, &s.Omega, &s.C, &s.D, &s.E, &s.F, &s.S, &s.U, &s.V, &s.Z})
        out.blocks(*b);

    out.size(c.forecast.history);
    out.u64(c.forecast.shared ? 1 : 0);
    out.matrix(c.forecast.sigma);
    out.matrix(c.forecast.fit_loss);
    out.finish();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    Reader in(path);
    std::array<char, 8> magic{};
    in.raw().read(magic.data(), magic.size());
    if (!in.raw() || magic != kMagic)
        throw LoadError(in.name(), "not a model checkpoint");
    const std::uint64_t version = in.u64();
    if (version != kCheckpointVersion)
        throw LoadError(in.name(), "unsupported checkpoint version " + std::to_string(version));

    Checkpoint c;
    Hyperparams& hp = c.hp;
    for (double* v : {&hp.alpha, &hp.beta, &hp.gamma, &hp.rho, &hp.eta, &hp.theta, &hp.eps_omega, &hp.tol})
        *v = in.f64();
    hp.max_iters = in.size();
    hp.max_halvings = in.size();
    hp.spatial = in.u64() != 0;
    c.lag = in.size();

    ModelState& s = c.state;
    for (std::size_t* v : {&s.regions, &s.slots, &s.types, &s.features, &s.pairs})
        *v = in.size();
    for (auto* b : {&s.P, &s.Q, &s.Omega, &s.C, &s.D, &s.E, &s.F, &s.S, &s.U, &s.V, &s.Z})
        *b = in.blocks();

    const auto M = static_cast<Eigen::Index>(s.features), T = static_cast<Eigen::Index>(s.slots);
    const auto K = static_cast<Eigen::Index>(s.types), pairs = static_cast<Eigen::Index>(s.pairs);
    const std::size_t N = s.regions, nk = s.regions * s.types;
    if (T < 2)
        throw LoadError(in.name(), "checkpoint has fewer than two slots");
    expect_blocks(in, s.P, N, M, T, "P");
    expect_blocks(in, s.Q, nk, M, T, "Q");
    expect_blocks(in, s.Omega, N * s.slots, K, K, "Omega");
    expect_blocks(in, s.C, N, M, T - 1, "C");
    expect_blocks(in, s.S, N, M, T - 1, "S");
    expect_blocks(in, s.D, nk, M, T - 1, "D");
    expect_blocks(in, s.U, nk, M, T - 1, "U");
    expect_blocks(in, s.E, s.slots, M, pairs, "E");
    expect_blocks(in, s.V, s.slots, M, pairs, "V");
    expect_blocks(in, s.F, s.slots * s.types, M, pairs, "F");
    expect_blocks(in, s.Z, s.slots * s.types, M, pairs, "Z");

    c.forecast.history = in.size();
    c.forecast.shared = in.u64() != 0;
    c.forecast.sigma = in.matrix();
    c.forecast.fit_loss = in.matrix();
    if (c.forecast.sigma.rows() != static_cast<Eigen::Index>(N) || c.forecast.sigma.cols() != K ||
        c.forecast.fit_loss.rows() != static_cast<Eigen::Index>(N) || c.forecast.fit_loss.cols() != K)
        throw LoadError(in.name(), "checkpoint forecast table does not match the model");
    in.expect_end();
    return c;
}

} // namespace ccc
