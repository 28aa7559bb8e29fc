#include "svimo/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "svimo/errors.hpp"
#include "svimo/rng.hpp"

namespace svimo {

namespace {

constexpr char kTensorMagic[8] = {'S', 'V', 'T', 'E', 'N', '0', '0', '1'};

void write_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
    os.write(kTensorMagic, 8);
    unsigned char dtype = 0;  // f64
    unsigned char rank = static_cast<unsigned char>(t.rank());
    os.put(static_cast<char>(dtype));
    os.put(static_cast<char>(rank));
    for (int64_t i = 0; i < t.rank(); ++i) write_u64(os, static_cast<uint64_t>(t.dim(i)));
    os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

Tensor read_tensor(std::istream& is, const std::string& what) {
    char magic[8];
    is.read(magic, 8);
    if (!is.good() || std::memcmp(magic, kTensorMagic, 8) != 0) {
        throw DataIntegrityError("bad tensor magic in " + what);
    }
    int dtype = is.get();
    int rank = is.get();
    if (dtype != 0 || rank < 0 || rank > 8) {
        throw DataIntegrityError("unsupported tensor header in " + what);
    }
    std::vector<int64_t> shape(static_cast<size_t>(rank));
    for (auto& d : shape) d = static_cast<int64_t>(read_u64(is));
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!is.good()) throw DataIntegrityError("truncated tensor payload in " + what);
    return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
    std::ostringstream os(std::ios::binary);
    write_tensor(os, t);
    atomic_write_file(path, os.str());
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingArtifactError("cannot open tensor file " + path.string());
    return read_tensor(is, path.string());
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
    if (image.rank() != 3 || image.dim(2) != 3) {
        throw ShapeError("write_ppm expects [H,W,3], got " + image.shape_str());
    }
    int64_t h = image.dim(0), w = image.dim(1);
    std::ostringstream os(std::ios::binary);
    os << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(w * 3));
    const double* p = image.data();
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t i = 0; i < w * 3; ++i) {
            double v = std::min(1.0, std::max(0.0, p[y * w * 3 + i]));
            row[static_cast<size_t>(i)] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    atomic_write_file(path, os.str());
}

namespace {

int read_pnm_int(std::istream& is) {
    // skips whitespace and '#' comments
    int c = is.get();
    while (c == '#' || std::isspace(c)) {
        if (c == '#') {
            while (c != '\n' && c != EOF) c = is.get();
        }
        c = is.get();
    }
    int v = 0;
    while (std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = is.get();
    }
    return v;
}

}  // namespace

Tensor read_ppm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingArtifactError("cannot open image " + path.string());
    char p, six;
    is.get(p);
    is.get(six);
    if (p != 'P' || six != '6') throw DataIntegrityError("not a P6 ppm: " + path.string());
    int w = read_pnm_int(is);
    int h = read_pnm_int(is);
    int maxval = read_pnm_int(is);
    if (w <= 0 || h <= 0 || maxval != 255) throw DataIntegrityError("bad ppm header: " + path.string());
    std::vector<unsigned char> buf(static_cast<size_t>(w) * h * 3);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is.good()) throw DataIntegrityError("truncated ppm payload: " + path.string());
    Tensor img({h, w, 3});
    for (size_t i = 0; i < buf.size(); ++i) img[static_cast<int64_t>(i)] = buf[i] / 255.0;
    return img;
}

void write_pgm(const std::filesystem::path& path, const std::vector<uint8_t>& mask, int64_t h, int64_t w) {
    if (static_cast<int64_t>(mask.size()) != h * w) throw ShapeError("write_pgm size mismatch");
    std::ostringstream os(std::ios::binary);
    os << "P5\n" << w << " " << h << "\n255\n";
    for (uint8_t m : mask) os.put(m ? char(255) : char(0));
    atomic_write_file(path, os.str());
}

std::vector<uint8_t> read_pgm(const std::filesystem::path& path, int64_t& h, int64_t& w) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingArtifactError("cannot open mask " + path.string());
    char p, five;
    is.get(p);
    is.get(five);
    if (p != 'P' || five != '5') throw DataIntegrityError("not a P5 pgm: " + path.string());
    int ww = read_pnm_int(is);
    int hh = read_pnm_int(is);
    int maxval = read_pnm_int(is);
    if (ww <= 0 || hh <= 0 || maxval != 255) throw DataIntegrityError("bad pgm header: " + path.string());
    std::vector<unsigned char> buf(static_cast<size_t>(ww) * hh);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is.good()) throw DataIntegrityError("truncated pgm payload: " + path.string());
    h = hh;
    w = ww;
    std::vector<uint8_t> mask(buf.size());
    for (size_t i = 0; i < buf.size(); ++i) mask[i] = buf[i] >= 128 ? 1 : 0;
    return mask;
}

uint64_t hash_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingArtifactError("cannot hash missing file " + path.string());
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (is.good()) {
        is.read(buf, sizeof(buf));
        std::streamsize n = is.gcount();
        if (n > 0) h = fnv1a64(buf, static_cast<size_t>(n), h);
    }
    return h;
}

std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingArtifactError("cannot open " + path.string());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    atomic_write_file(path, text);
}

void atomic_write_file(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw MissingArtifactError("cannot write " + tmp.string());
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!os.good()) throw DataIntegrityError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace svimo
