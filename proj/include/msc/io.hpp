#ifndef MSC_IO_HPP
#define MSC_IO_HPP

#include <msc/em.hpp>
#include <msc/types.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace msc {

// Parse/shape failures in file handling.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Plain-text matrix: '# msc-matrix rows=<r> cols=<c>' then one comma-separated
// row per line. Numbers are written in shortest round-trip form, so
// write(read(f)) reproduces f byte for byte.
void write_matrix(const std::string& path, const Mat& M);
Mat read_matrix(const std::string& path);

// Serialized fit: dictionary, supports, weights, per-signal noise, chosen d,
// BIC trace and the config echo. Format tag msc-model-v1.
struct ModelFile {
    std::string family;
    std::string kernel;
    int trials = 1;
    int m = 0;
    int K = 0;
    int n = 0;
    int chosen_d = 1;
    std::vector<double> bic;
    std::string config_echo;
    Mat dictionary;                     // m x K
    std::vector<std::string> supports;  // bitstrings, length K
    Vec pi;
    Vec sigma2;  // per signal; empty for count families
    Vec omega;   // per signal; spatial only
};

ModelFile model_from_fit(const FitResult& fit, int n_signals);
void write_model(const std::string& path, const ModelFile& mf);
ModelFile read_model(const std::string& path);

// 8-bit binary PGM (P5), maxval 255.
struct PgmImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major

    Mat to_matrix() const;
    static PgmImage from_matrix(const Mat& M);  // rounds and clamps to [0,255]
};

PgmImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const PgmImage& img);

std::string read_file_bytes(const std::string& path);

}  // namespace msc

#endif
