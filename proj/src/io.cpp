#include <msc/io.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace msc {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream f(path, mode);
    if (!f) throw io_error("cannot open for writing: " + path);
    return f;
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream f(path, mode);
    if (!f) throw io_error("cannot open for reading: " + path);
    return f;
}

void write_csv_row(std::ostream& os, const Vec& v) {
    for (Eigen::Index c = 0; c < v.size(); ++c) {
        if (c) os << ',';
        os << fmt_double(v[c]);
    }
    os << '\n';
}

Vec parse_csv_row(const std::string& line, Eigen::Index expect, const std::string& what) {
    auto cells = split(line, ',');
    if (expect >= 0 && static_cast<Eigen::Index>(cells.size()) != expect)
        throw io_error(what + ": expected " + std::to_string(expect) + " values, got " +
                       std::to_string(cells.size()));
    Vec v(static_cast<Eigen::Index>(cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) v[static_cast<Eigen::Index>(c)] = parse_double(cells[c]);
    return v;
}

}  // namespace

void write_matrix(const std::string& path, const Mat& M) {
    auto f = open_out(path);
    f << "# msc-matrix rows=" << M.rows() << " cols=" << M.cols() << "\n";
    for (Eigen::Index r = 0; r < M.rows(); ++r) write_csv_row(f, M.row(r).transpose());
}

Mat read_matrix(const std::string& path) {
    auto f = open_in(path);
    std::string header;
    if (!std::getline(f, header)) throw io_error(path + ": empty file");
    long rows = -1, cols = -1;
    if (std::sscanf(header.c_str(), "# msc-matrix rows=%ld cols=%ld", &rows, &cols) != 2)
        throw io_error(path + ": bad matrix header");
    if (rows < 0 || cols < 1) throw io_error(path + ": bad matrix shape");
    Mat M(rows, cols);
    std::string line;
    for (long r = 0; r < rows; ++r) {
        if (!std::getline(f, line)) throw io_error(path + ": fewer rows than declared");
        M.row(r) = parse_csv_row(line, cols, path).transpose();
    }
    if (std::getline(f, line) && !line.empty()) throw io_error(path + ": more rows than declared");
    return M;
}

ModelFile model_from_fit(const FitResult& fit, int n_signals) {
    ModelFile mf;
    mf.family = family_name(fit.state.family);
    mf.kernel = kernel_name(fit.state.kernel);
    mf.trials = fit.state.trials;
    mf.m = fit.state.dict.m();
    mf.K = fit.state.dict.K();
    mf.n = n_signals;
    mf.chosen_d = fit.chosen_d;
    mf.bic = fit.bic_values;
    mf.config_echo = fit.config_echo;
    mf.dictionary = fit.state.dict.atoms;
    for (const auto& g : fit.state.supports.masks) mf.supports.push_back(g.to_string());
    mf.pi = fit.state.weights;
    if (is_gaussian(fit.state.family)) {
        mf.sigma2.resize(n_signals);
        for (int i = 0; i < n_signals; ++i) mf.sigma2[i] = fit.state.noise[i].sigma2;
        if (fit.state.family == Family::gaussian_spatial) {
            mf.omega.resize(n_signals);
            for (int i = 0; i < n_signals; ++i) mf.omega[i] = fit.state.noise[i].omega;
        }
    }
    return mf;
}

void write_model(const std::string& path, const ModelFile& mf) {
    auto f = open_out(path);
    f << "msc-model-v1\n";
    f << "family " << mf.family << "\n";
    f << "kernel " << mf.kernel << "\n";
    f << "trials " << mf.trials << "\n";
    f << "m " << mf.m << "\n";
    f << "K " << mf.K << "\n";
    f << "n " << mf.n << "\n";
    f << "chosen_d " << mf.chosen_d << "\n";
    f << "bic " << mf.bic.size();
    for (double b : mf.bic) f << ' ' << fmt_double(b);
    f << "\n";
    f << "config " << mf.config_echo << "\n";
    f << "dictionary " << mf.dictionary.rows() << " " << mf.dictionary.cols() << "\n";
    for (Eigen::Index r = 0; r < mf.dictionary.rows(); ++r)
        write_csv_row(f, mf.dictionary.row(r).transpose());
    f << "supports " << mf.supports.size() << "\n";
    for (const auto& s : mf.supports) f << s << "\n";
    f << "pi ";
    write_csv_row(f, mf.pi);
    if (mf.sigma2.size() > 0) {
        f << "sigma2 ";
        write_csv_row(f, mf.sigma2);
    }
    if (mf.omega.size() > 0) {
        f << "omega ";
        write_csv_row(f, mf.omega);
    }
    f << "end\n";
}

namespace {
std::string expect_line(std::istream& is, const std::string& path) {
    std::string line;
    if (!std::getline(is, line)) throw io_error(path + ": truncated model file");
    return line;
}

std::string expect_tag(std::istream& is, const std::string& tag, const std::string& path) {
    std::string line = expect_line(is, path);
    if (line.rfind(tag + " ", 0) != 0) throw io_error(path + ": expected '" + tag + "' line");
    return line.substr(tag.size() + 1);
}
}  // namespace

ModelFile read_model(const std::string& path) {
    auto f = open_in(path);
    if (expect_line(f, path) != "msc-model-v1") throw io_error(path + ": not an msc-model-v1 file");
    ModelFile mf;
    mf.family = expect_tag(f, "family", path);
    mf.kernel = expect_tag(f, "kernel", path);
    mf.trials = static_cast<int>(parse_double(expect_tag(f, "trials", path)));
    mf.m = static_cast<int>(parse_double(expect_tag(f, "m", path)));
    mf.K = static_cast<int>(parse_double(expect_tag(f, "K", path)));
    mf.n = static_cast<int>(parse_double(expect_tag(f, "n", path)));
    mf.chosen_d = static_cast<int>(parse_double(expect_tag(f, "chosen_d", path)));
    {
        auto cells = split(expect_tag(f, "bic", path), ' ');
        std::size_t count = static_cast<std::size_t>(parse_double(cells.at(0)));
        if (cells.size() != count + 1) throw io_error(path + ": bic count mismatch");
        for (std::size_t a = 1; a < cells.size(); ++a) mf.bic.push_back(parse_double(cells[a]));
    }
    mf.config_echo = expect_tag(f, "config", path);
    {
        auto dims = split(expect_tag(f, "dictionary", path), ' ');
        if (dims.size() != 2) throw io_error(path + ": bad dictionary dims");
        long r = static_cast<long>(parse_double(dims[0])), c = static_cast<long>(parse_double(dims[1]));
        mf.dictionary.resize(r, c);
        for (long i = 0; i < r; ++i)
            mf.dictionary.row(i) = parse_csv_row(expect_line(f, path), c, path).transpose();
    }
    {
        long J = static_cast<long>(parse_double(expect_tag(f, "supports", path)));
        for (long j = 0; j < J; ++j) {
            std::string s = expect_line(f, path);
            if (static_cast<int>(s.size()) != mf.K) throw io_error(path + ": support length != K");
            mf.supports.push_back(s);
        }
        mf.pi = parse_csv_row(expect_tag(f, "pi", path), J, path);
    }
    std::string line = expect_line(f, path);
    if (line.rfind("sigma2 ", 0) == 0) {
        mf.sigma2 = parse_csv_row(line.substr(7), mf.n, path);
        line = expect_line(f, path);
    }
    if (line.rfind("omega ", 0) == 0) {
        mf.omega = parse_csv_row(line.substr(6), mf.n, path);
        line = expect_line(f, path);
    }
    if (line != "end") throw io_error(path + ": missing end marker");
    return mf;
}

Mat PgmImage::to_matrix() const {
    Mat M(height, width);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) M(r, c) = static_cast<double>(pixels[static_cast<std::size_t>(r) * width + c]);
    return M;
}

PgmImage PgmImage::from_matrix(const Mat& M) {
    PgmImage img;
    img.height = static_cast<int>(M.rows());
    img.width = static_cast<int>(M.cols());
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            double v = std::round(M(r, c));
            img.pixels[static_cast<std::size_t>(r) * img.width + c] =
                static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
    return img;
}

namespace {
// PGM token reader that skips whitespace and # comments.
std::string pgm_token(std::istream& is, const std::string& path) {
    std::string tok;
    int ch;
    while ((ch = is.get()) != EOF) {
        if (ch == '#') {
            while ((ch = is.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) throw io_error(path + ": truncated PGM header");
    return tok;
}
}  // namespace

PgmImage read_pgm(const std::string& path) {
    auto f = open_in(path, std::ios::binary);
    if (pgm_token(f, path) != "P5") throw io_error(path + ": not a binary PGM (P5)");
    PgmImage img;
    img.width = static_cast<int>(parse_double(pgm_token(f, path)));
    img.height = static_cast<int>(parse_double(pgm_token(f, path)));
    int maxval = static_cast<int>(parse_double(pgm_token(f, path)));
    if (maxval != 255) throw io_error(path + ": PGM maxval must be 255");
    if (img.width < 1 || img.height < 1) throw io_error(path + ": bad PGM dimensions");
    img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
    f.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (f.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw io_error(path + ": PGM payload shorter than width*height");
    return img;
}

void write_pgm(const std::string& path, const PgmImage& img) {
    auto f = open_out(path, std::ios::binary);
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
}

std::string read_file_bytes(const std::string& path) {
    auto f = open_in(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace msc
