#include "ifef/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "ifef/error.hpp"

namespace ifef {

void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw std::runtime_error("write to " + tmp.string() + " failed");
        }
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr))
        throw std::runtime_error("SHA-256 failed");
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i)
        out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return out.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

const char* const kMetricsHeader = "epoch,lower_loss,upper_loss,rel_l2,lambda,wall_ms";

std::string metrics_csv(const std::vector<EpochMetrics>& metrics) {
    std::string out = kMetricsHeader;
    out += '\n';
    for (const auto& m : metrics) {
        out += std::to_string(m.epoch);
        for (double v : {m.lower_loss, m.upper_loss, m.rel_l2, m.lambda, m.wall_ms}) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

// ---- checkpoint ----

namespace {

constexpr char kMagic[8] = {'I', 'F', 'E', 'F', 'C', 'K', 'P', 'T'};

class Writer {
public:
    template <class T>
    void put(T v) {
        char raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        bytes_.append(raw, sizeof(T));
    }
    void doubles(const double* p, Index n) {
        for (Index i = 0; i < n; ++i) put(p[i]);
    }
    std::string take() { return std::move(bytes_); }
    void raw(const char* p, std::size_t n) { bytes_.append(p, n); }

private:
    std::string bytes_;
};

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}
    template <class T>
    T get() {
        if (at_ + sizeof(T) > bytes_.size()) throw ConfigError("checkpoint is truncated");
        T v;
        std::memcpy(&v, bytes_.data() + at_, sizeof(T));
        at_ += sizeof(T);
        return v;
    }
    void doubles(double* p, Index n) {
        for (Index i = 0; i < n; ++i) p[i] = get<double>();
    }
    bool done() const { return at_ == bytes_.size(); }

private:
    const std::string& bytes_;
    std::size_t at_ = 0;
};

static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
    ckpt.params.validate();
    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.params.layers.size()));
    for (const auto& layer : ckpt.params.layers) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(layer.weight.rows()));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(layer.weight.cols()));
        for (Index r = 0; r < layer.weight.rows(); ++r)
            for (Index c = 0; c < layer.weight.cols(); ++c) w.put(layer.weight(r, c));
        w.doubles(layer.bias.data(), layer.bias.size());
    }
    const auto& net = ckpt.params;
    w.put<std::uint8_t>(net.input_scale.size() ? 1 : 0);
    if (net.input_scale.size()) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(net.input_scale.size()));
        w.doubles(net.input_center.data(), net.input_center.size());
        w.doubles(net.input_scale.data(), net.input_scale.size());
    }
    w.put<std::uint8_t>(ckpt.params.readout ? 1 : 0);
    if (ckpt.params.readout) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.params.readout->size()));
        w.doubles(ckpt.params.readout->data(), ckpt.params.readout->size());
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.theta.size()));
    w.doubles(ckpt.theta.data(), ckpt.theta.size());
    w.put<std::uint8_t>(ckpt.rff ? 1 : 0);
    if (ckpt.rff) {
        w.put<std::uint64_t>(ckpt.rff->D);
        w.put<std::uint64_t>(ckpt.rff->p);
        w.put<double>(ckpt.rff->sigma);
        w.put<std::uint64_t>(ckpt.rff->seed);
    }
    return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw ConfigError("not a checkpoint file");
    Reader r(bytes);
    for (std::size_t i = 0; i < sizeof kMagic; ++i) r.get<char>();
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw ConfigError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    const auto layers = r.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < layers; ++k) {
        const auto rows = r.get<std::uint32_t>();
        const auto cols = r.get<std::uint32_t>();
        DenseLayer layer;
        layer.weight.resize(rows, cols);
        for (Index i = 0; i < rows; ++i)
            for (Index j = 0; j < cols; ++j) layer.weight(i, j) = r.get<double>();
        layer.bias.resize(rows);
        r.doubles(layer.bias.data(), rows);
        ckpt.params.layers.push_back(std::move(layer));
    }
    if (r.get<std::uint8_t>()) {
        const auto n = r.get<std::uint32_t>();
        ckpt.params.input_center.resize(n);
        ckpt.params.input_scale.resize(n);
        r.doubles(ckpt.params.input_center.data(), n);
        r.doubles(ckpt.params.input_scale.data(), n);
    }
    if (r.get<std::uint8_t>()) {
        const auto n = r.get<std::uint32_t>();
        Eigen::RowVectorXd readout(n);
        r.doubles(readout.data(), n);
        ckpt.params.readout = std::move(readout);
    }
    const auto n_theta = r.get<std::uint32_t>();
    ckpt.theta.resize(n_theta);
    r.doubles(ckpt.theta.data(), n_theta);
    if (r.get<std::uint8_t>()) {
        Checkpoint::Rff rff;
        rff.D = r.get<std::uint64_t>();
        rff.p = r.get<std::uint64_t>();
        rff.sigma = r.get<double>();
        rff.seed = r.get<std::uint64_t>();
        ckpt.rff = rff;
    }
    if (!r.done()) throw ConfigError("trailing bytes in checkpoint");
    ckpt.params.validate();
    return ckpt;
}

void write_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
    write_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const fs::path& path) { return decode_checkpoint(read_file(path)); }

FeatureBasis checkpoint_basis(const Checkpoint& ckpt) {
    FeatureBasis basis;
    basis.params = ckpt.params;
    basis.params.readout.reset();
    if (ckpt.rff)
        basis.rff = sample_rff(static_cast<Index>(ckpt.rff->D), static_cast<Index>(ckpt.rff->p),
                               ckpt.rff->sigma, ckpt.rff->seed);
    basis.validate();
    return basis;
}

// ---- reference data ----

ReferenceData load_reference_csv(const fs::path& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "t,x,u")
        throw ConfigError(path.string() + ": expected header 't,x,u'");
    std::vector<double> ts, xs, us;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double v[3];
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (int k = 0; k < 3; ++k) {
            const auto res = std::from_chars(p, end, v[k]);
            if (res.ec != std::errc()) throw ConfigError(path.string() + ": malformed line '" + line + "'");
            p = res.ptr;
            if (k < 2) {
                if (p == end || *p != ',') throw ConfigError(path.string() + ": malformed line '" + line + "'");
                ++p;
            }
        }
        ts.push_back(v[0]);
        xs.push_back(v[1]);
        us.push_back(v[2]);
    }
    ReferenceData ref;
    const Index n = static_cast<Index>(us.size());
    if (n == 0) throw ConfigError(path.string() + ": no reference rows");
    ref.target.points.resize(2, n);
    ref.target.exact.resize(n);
    for (Index i = 0; i < n; ++i) {
        ref.target.points(0, i) = xs[i];
        ref.target.points(1, i) = ts[i];
        ref.target.exact(i) = us[i];
    }
    ref.checksum = sha256_hex(text);
    return ref;
}

}  // namespace ifef
