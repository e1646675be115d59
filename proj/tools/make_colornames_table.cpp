// Writes the 32768 x 10 Color Names lookup used by the colornames feature.
//
// Each 5-bit RGB bin gets a soft assignment to ten named color prototypes:
// a softmax over negative squared CIE-Lab distances to the prototypes.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <vector>

namespace {

struct Lab {
    double L, a, b;
};

double srgb_to_linear(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }

Lab to_lab(double r8, double g8, double b8) {
    const double r = srgb_to_linear(r8 / 255.0), g = srgb_to_linear(g8 / 255.0), b = srgb_to_linear(b8 / 255.0);
    // D65 white
    const double X = (0.4124 * r + 0.3576 * g + 0.1805 * b) / 0.95047;
    const double Y = 0.2126 * r + 0.7152 * g + 0.0722 * b;
    const double Z = (0.0193 * r + 0.1192 * g + 0.9505 * b) / 1.08883;
    auto f = [](double t) { return t > 216.0 / 24389.0 ? std::cbrt(t) : (24389.0 / 27.0 * t + 16.0) / 116.0; };
    const double fx = f(X), fy = f(Y), fz = f(Z);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

// Order: black, blue, brown, grey, green, orange, purple, red, white, yellow.
constexpr std::array<std::array<double, 3>, 10> kPrototypes{{
    {0, 0, 0},
    {30, 60, 200},
    {130, 80, 40},
    {128, 128, 128},
    {40, 160, 40},
    {255, 140, 0},
    {130, 40, 160},
    {210, 30, 30},
    {255, 255, 255},
    {250, 230, 40},
}};

constexpr double kScale = 20.0; // Lab distance at which affinity drops by 1/e

} // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_colornames_table <output.bin>\n";
        return 2;
    }
    std::array<Lab, 10> protos{};
    for (std::size_t i = 0; i < protos.size(); ++i)
        protos[i] = to_lab(kPrototypes[i][0], kPrototypes[i][1], kPrototypes[i][2]);

    std::vector<unsigned char> bytes;
    bytes.reserve(32768u * 10u * 4u);
    for (int idx = 0; idx < 32768; ++idx) {
        // bin centers of the 5-bit quantization
        const double r = ((idx >> 10) & 31) * 8 + 3.5;
        const double g = ((idx >> 5) & 31) * 8 + 3.5;
        const double b = (idx & 31) * 8 + 3.5;
        const Lab c = to_lab(r, g, b);
        std::array<double, 10> e{};
        double best = -1e300;
        for (std::size_t i = 0; i < protos.size(); ++i) {
            const double d2 = (c.L - protos[i].L) * (c.L - protos[i].L) + (c.a - protos[i].a) * (c.a - protos[i].a) +
                              (c.b - protos[i].b) * (c.b - protos[i].b);
            e[i] = -d2 / (kScale * kScale);
            best = std::max(best, e[i]);
        }
        double sum = 0.0;
        for (double& v : e) {
            v = std::exp(v - best);
            sum += v;
        }
        for (double v : e) {
            const float f = static_cast<float>(v / sum);
            std::uint32_t u = 0;
            std::memcpy(&u, &f, 4);
            for (int k = 0; k < 4; ++k)
                bytes.push_back(static_cast<unsigned char>((u >> (8 * k)) & 0xFF));
        }
    }
    std::ofstream out(argv[1], std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        std::cerr << "cannot write " << argv[1] << "\n";
        return 1;
    }
    return 0;
}
