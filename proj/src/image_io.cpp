#include "gtrm/image_io.hpp"

#include <fstream>
#include <sstream>

#include "gtrm/errors.hpp"

namespace gtrm::io {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
    throw Error(path.string() + ": " + what);
}

// Next whitespace-delimited token, skipping '#' comments (PGM/PPM headers).
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (!isspace(c)) {
            tok.push_back(char(c));
            break;
        }
    }
    while ((c = in.get()) != EOF && !isspace(c)) tok.push_back(char(c));
    return tok;
}

uint32_t parse_dim(const std::string& tok, const std::filesystem::path& path) {
    try {
        const unsigned long v = std::stoul(tok);
        if (v == 0 || v > 0xffffffffull) throw std::out_of_range("dim");
        return uint32_t(v);
    } catch (const std::exception&) {
        fail(path, "bad header value '" + tok + "'");
    }
}

Frame read_pnm_body(std::istream& in, const std::filesystem::path& path, uint32_t w,
                    uint32_t h, int channels) {
    std::vector<uint8_t> raw(std::size_t(w) * h * channels);
    in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
    if (std::size_t(in.gcount()) != raw.size()) fail(path, "truncated pixel data");

    if (channels == 1) return make_frame(0, 0, w, h, PixelFormat::GRAY8, std::move(raw));
    if (channels == 4) return make_frame(0, 0, w, h, PixelFormat::RGBA8, std::move(raw));

    std::vector<uint8_t> rgba(std::size_t(w) * h * 4);
    for (std::size_t i = 0; i < std::size_t(w) * h; ++i) {
        rgba[i * 4] = raw[i * 3];
        rgba[i * 4 + 1] = raw[i * 3 + 1];
        rgba[i * 4 + 2] = raw[i * 3 + 2];
        rgba[i * 4 + 3] = 255;
    }
    return make_frame(0, 0, w, h, PixelFormat::RGBA8, std::move(rgba));
}

Frame read_pam_stream(std::istream& in, const std::filesystem::path& path) {
    uint32_t w = 0, h = 0, depth = 0, maxval = 0;
    std::string tupltype;
    std::string line;
    std::getline(in, line);  // consume rest of magic line
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key.empty() || key[0] == '#') continue;
        if (key == "ENDHDR") break;
        if (key == "WIDTH") ls >> w;
        else if (key == "HEIGHT") ls >> h;
        else if (key == "DEPTH") ls >> depth;
        else if (key == "MAXVAL") ls >> maxval;
        else if (key == "TUPLTYPE") ls >> tupltype;
        else fail(path, "unknown PAM header field '" + key + "'");
    }
    if (w == 0 || h == 0) fail(path, "missing or zero dimensions");
    if (maxval != 255) fail(path, "only MAXVAL 255 supported");
    if (depth == 4 && tupltype == "RGB_ALPHA") return read_pnm_body(in, path, w, h, 4);
    if (depth == 1 && tupltype == "GRAYSCALE") return read_pnm_body(in, path, w, h, 1);
    fail(path, "unsupported PAM depth/tupltype");
}

}  // namespace

void write_pam(const std::filesystem::path& path, const Frame& frame) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    const bool rgba = frame.format == PixelFormat::RGBA8;
    out << "P7\n"
        << "WIDTH " << frame.width << "\n"
        << "HEIGHT " << frame.height << "\n"
        << "DEPTH " << (rgba ? 4 : 1) << "\n"
        << "MAXVAL 255\n"
        << "TUPLTYPE " << (rgba ? "RGB_ALPHA" : "GRAYSCALE") << "\n"
        << "ENDHDR\n";
    out.write(reinterpret_cast<const char*>(frame.data.data()),
              std::streamsize(frame.data.size()));
    if (!out) fail(path, "write failed");
}

Frame read_pam(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    char m0 = 0, m1 = 0;
    in.get(m0).get(m1);
    if (m0 != 'P' || m1 != '7') fail(path, "not a PAM file");
    return read_pam_stream(in, path);
}

Frame read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    char m0 = 0, m1 = 0;
    in.get(m0).get(m1);
    if (m0 != 'P') fail(path, "not a netpbm file");
    if (m1 == '7') return read_pam_stream(in, path);
    if (m1 != '5' && m1 != '6') fail(path, "unsupported netpbm variant");
    const uint32_t w = parse_dim(next_token(in), path);
    const uint32_t h = parse_dim(next_token(in), path);
    const uint32_t maxval = parse_dim(next_token(in), path);
    if (maxval != 255) fail(path, "only maxval 255 supported");
    // exactly one whitespace byte separates header and data; already consumed
    // by next_token's trailing-delimiter read
    return read_pnm_body(in, path, w, h, m1 == '5' ? 1 : 3);
}

void write_pgm(const std::filesystem::path& path, const imaging::GrayImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              std::streamsize(img.data.size()));
    if (!out) fail(path, "write failed");
}

}  // namespace gtrm::io
