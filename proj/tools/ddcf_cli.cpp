// ddcf: track, evaluate and generate synthetic sequences.

#include <CLI11.hpp>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <ddcf/ddcf.hpp>

namespace fs = std::filesystem;
using namespace ddcf;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitFrame = 3;
constexpr int kExitMismatch = 4;

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    static const std::vector<std::string> known{".png", ".bmp", ".ppm", ".pgm", ".pnm", ".tif", ".tiff", ".jpg", ".jpeg"};
    return std::find(known.begin(), known.end(), ext) != known.end();
}

std::vector<fs::path> list_frames(const fs::path& dir) {
    std::vector<fs::path> frames;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_image_file(e.path()))
            frames.push_back(e.path());
    std::sort(frames.begin(), frames.end(), [](const fs::path& a, const fs::path& b) {
        return a.filename().string() < b.filename().string();
    });
    return frames;
}

Image read_frame(const fs::path& path) {
    const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (raw.empty())
        throw std::runtime_error("cannot read image " + path.string());
    if (raw.depth() != CV_8U)
        throw std::runtime_error("expected an 8-bit image: " + path.string());
    cv::Mat rgb;
    switch (raw.channels()) {
    case 1:
        rgb = raw;
        break;
    case 3:
        cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB);
        break;
    case 4:
        cv::cvtColor(raw, rgb, cv::COLOR_BGRA2RGB);
        break;
    default:
        throw std::runtime_error("unsupported channel count in " + path.string());
    }
    Image img(rgb.cols, rgb.rows, rgb.channels());
    for (int y = 0; y < rgb.rows; ++y) {
        const unsigned char* row = rgb.ptr<unsigned char>(y);
        for (int x = 0; x < rgb.cols; ++x)
            for (int c = 0; c < img.channels; ++c)
                img.at(x, y, c) = row[x * img.channels + c] / 255.0f;
    }
    return img;
}

cv::Mat to_bgr(const Image& img) {
    cv::Mat out(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        unsigned char* row = out.ptr<unsigned char>(y);
        for (int x = 0; x < img.width; ++x) {
            const int r = to_byte(img.at(x, y, 0));
            const int g = to_byte(img.at(x, y, img.channels >= 3 ? 1 : 0));
            const int b = to_byte(img.at(x, y, img.channels >= 3 ? 2 : 0));
            row[3 * x] = static_cast<unsigned char>(b);
            row[3 * x + 1] = static_cast<unsigned char>(g);
            row[3 * x + 2] = static_cast<unsigned char>(r);
        }
    }
    return out;
}

void write_png(const fs::path& path, const cv::Mat& m) {
    if (!cv::imwrite(path.string(), m))
        throw std::runtime_error("cannot write " + path.string());
}

std::optional<Box> parse_box(const std::string& text) {
    std::istringstream in(text);
    try {
        const auto boxes = parse_groundtruth(in);
        if (boxes.size() != 1 || !(boxes[0].w > 0.0) || !(boxes[0].h > 0.0))
            return std::nullopt;
        return boxes[0];
    } catch (const ParseError&) {
        return std::nullopt;
    }
}

std::string format_result(const FrameResult& r) {
    std::string line = std::to_string(r.frame_index);
    char buf[64];
    auto add = [&](double v) {
        std::snprintf(buf, sizeof buf, ",%.6f", v);
        line += buf;
    };
    add(r.box.x);
    add(r.box.y);
    add(r.box.w);
    add(r.box.h);
    add(r.score);
    for (Vec2 p : r.subfilter_positions) {
        add(p.x);
        add(p.y);
    }
    add(r.transform.a11);
    add(r.transform.a12);
    add(r.transform.a21);
    add(r.transform.a22);
    return line;
}

// Boxes from a results file: fields 2-5 of each non-empty line.
std::vector<Box> parse_results(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open results file " + path.string());
    std::vector<Box> boxes;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        std::vector<double> v;
        std::stringstream fields(line);
        std::string tok;
        while (std::getline(fields, tok, ',')) {
            std::size_t used = 0;
            double d = 0.0;
            try {
                d = std::stod(tok, &used);
            } catch (const std::exception&) {
                throw ParseError("malformed number '" + tok + "'", lineno);
            }
            v.push_back(d);
        }
        if (v.size() < 5)
            throw ParseError("expected at least 5 fields", lineno);
        boxes.push_back({v[1], v[2], v[3], v[4]});
    }
    return boxes;
}

void render(const fs::path& dir, const Image& frame, const FrameResult& r) {
    cv::Mat out = to_bgr(frame);
    cv::rectangle(out, cv::Rect2d(r.box.x, r.box.y, r.box.w, r.box.h), cv::Scalar(0, 255, 0), 1, cv::LINE_AA);
    for (std::size_t m = 0; m < r.subfilter_positions.size(); ++m) {
        const Vec2 p = r.subfilter_positions[m];
        const cv::Scalar color = m == 0 ? cv::Scalar(0, 255, 255) : cv::Scalar(0, 0, 255);
        cv::circle(out, cv::Point(static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y))), 3, color, 1,
                   cv::LINE_AA);
    }
    char name[32];
    std::snprintf(name, sizeof name, "%05zu.png", r.frame_index);
    write_png(dir / name, out);
}

struct TrackArgs {
    std::string sequence;
    std::string init;
    std::string groundtruth;
    std::string output;
    std::string render_dir;
    std::string config_file;
    std::vector<std::string> overrides;
};

int cmd_track(const TrackArgs& a) {
    if (a.sequence.empty() || !fs::is_directory(a.sequence)) {
        std::cerr << "error: sequence directory not found: " << a.sequence << "\n";
        return kExitUsage;
    }
    const std::vector<fs::path> frames = list_frames(a.sequence);
    if (frames.empty()) {
        std::cerr << "error: no image frames in " << a.sequence << "\n";
        return kExitUsage;
    }

    Box init;
    if (!a.init.empty()) {
        const auto b = parse_box(a.init);
        if (!b) {
            std::cerr << "error: --init expects x,y,w,h with positive w and h, got '" << a.init << "'\n"
                      << "usage: ddcf track --sequence <dir> (--init x,y,w,h | --groundtruth <file>) --output <file>\n";
            return kExitUsage;
        }
        init = *b;
    } else if (!a.groundtruth.empty()) {
        std::vector<Box> gt;
        try {
            gt = parse_groundtruth(fs::path(a.groundtruth));
        } catch (const std::exception& e) {
            std::cerr << "error: " << a.groundtruth << ": " << e.what() << "\n";
            return kExitUsage;
        }
        if (gt.empty() || !(gt[0].w > 0.0) || !(gt[0].h > 0.0)) {
            std::cerr << "error: ground truth file has no usable first box\n";
            return kExitUsage;
        }
        init = gt[0];
    } else {
        std::cerr << "error: one of --init or --groundtruth is required\n";
        return kExitUsage;
    }

    RunConfig rc;
    TrackerConfig cfg;
    try {
        if (!a.config_file.empty())
            rc.load_file(a.config_file);
        for (const auto& o : a.overrides)
            rc.set_assignment(o, ConfigLayer::cli);
        cfg = rc.tracker_config();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    std::shared_ptr<const ColorNamesTable> table;
    std::shared_ptr<const PrecomputedFeatures> pre;
    try {
        if (cfg.features.colornames) {
            const std::string& p = rc.get("colornames_table");
            table = std::make_shared<ColorNamesTable>(ColorNamesTable::load(p.empty() ? colornames_asset_path() : fs::path(p)));
        }
        if (cfg.features.precomputed) {
            const std::string& p = rc.get("precomputed_features");
            if (p.empty())
                throw ConfigurationError("precomputed features selected but precomputed_features is not set");
            pre = std::make_shared<PrecomputedFeatures>(PrecomputedFeatures::load(p));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    if (!a.render_dir.empty())
        fs::create_directories(a.render_dir);
    std::ofstream out(a.output);
    if (!out) {
        std::cerr << "error: cannot write " << a.output << "\n";
        return kExitUsage;
    }

    try {
        Tracker tracker(cfg, FeatureExtractor(cfg.features, table, pre));
        Image current;
        auto frame_at = [&](std::size_t i) -> const Image& {
            current = read_frame(frames[i]);
            return current;
        };
        track_sequence(tracker, frame_at, frames.size(), init, [&](const FrameResult& r) {
            out << format_result(r) << "\n";
            if (!a.render_dir.empty())
                render(a.render_dir, current, r);
        });
    } catch (const SequenceError& e) {
        std::cerr << "error: unreadable frame " << e.frame() << " (" << frames[e.frame()].string() << "): " << e.what()
                  << "\n";
        return kExitFrame;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int cmd_eval(const std::string& results_path, const std::string& gt_path, const std::string& curve_path) {
    std::vector<Box> results, gt;
    try {
        results = parse_results(results_path);
        gt = parse_groundtruth(fs::path(gt_path));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    if (results.size() != gt.size()) {
        std::cerr << "error: " << results.size() << " result boxes vs " << gt.size() << " ground-truth boxes\n";
        return kExitMismatch;
    }
    if (results.empty()) {
        std::cerr << "error: no boxes to evaluate\n";
        return kExitUsage;
    }
    const std::vector<double> v = ious(results, gt);
    const SuccessCurve curve = success_curve(v);
    std::printf("OP=%.4f AUC=%.4f\n", overlap_precision(v, 0.5), curve.auc);
    if (!curve_path.empty()) {
        std::ofstream c(curve_path);
        if (!c) {
            std::cerr << "error: cannot write " << curve_path << "\n";
            return kExitUsage;
        }
        char buf[64];
        for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.2f,%.6f\n", curve.thresholds[i], curve.op_values[i]);
            c << buf;
        }
    }
    return 0;
}

int cmd_demo(const std::string& kind_name, int frames, const std::string& out_dir, std::uint64_t seed) {
    DemoKind kind;
    try {
        kind = parse_demo_kind(kind_name);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << " (expected translate, rotate or articulate)\n";
        return kExitUsage;
    }
    if (frames < 1) {
        std::cerr << "error: --frames must be >= 1\n";
        return kExitUsage;
    }
    const DemoSequence seq = make_demo(kind, frames, seed);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    std::ofstream gt(dir / "groundtruth.txt");
    char buf[128];
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%05zu.png", i);
        write_png(dir / buf, to_bgr(seq.frames[i]));
        const Box& b = seq.groundtruth[i];
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f\n", b.x, b.y, b.w, b.h);
        gt << buf;
    }
    return gt ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deformable correlation filter tracker"};
    app.require_subcommand(1);

    TrackArgs ta;
    auto* track = app.add_subcommand("track", "Track a target through an image sequence");
    track->add_option("--sequence", ta.sequence, "Directory of frames (ascending lexicographic order)")->required();
    track->add_option("--init", ta.init, "Initial box x,y,w,h");
    track->add_option("--groundtruth", ta.groundtruth, "Ground-truth file; its first box initializes the tracker");
    track->add_option("--output", ta.output, "Result file")->required();
    track->add_option("--render", ta.render_dir, "Directory for annotated frames");
    track->add_option("--config", ta.config_file, "key = value configuration file");
    track->add_option("--set", ta.overrides, "Configuration override key=value (repeatable)");
    std::string features, mode;
    double lambda = -1.0;
    int parts = -2;
    track->add_option("--features", features, "Feature selector, e.g. grayscale+colornames");
    track->add_option("--mode", mode, "Deformation prior: affine or identity");
    track->add_option("--lambda", lambda, "Position prior weight");
    track->add_option("--parts", parts, "Part grid: -1 by target size, 0 root only, n for n x n");

    std::string results, eval_gt, curve;
    auto* eval = app.add_subcommand("eval", "Overlap precision and AUC of a result file");
    eval->add_option("--results", results, "Result file written by track")->required();
    eval->add_option("--groundtruth", eval_gt, "Ground-truth file")->required();
    eval->add_option("--curve", curve, "Write threshold,op pairs here");

    std::string kind, out_dir;
    int frames = 0;
    std::uint64_t seed = 1;
    auto* demo = app.add_subcommand("demo", "Write a synthetic sequence with ground truth");
    demo->add_option("--kind", kind, "translate, rotate or articulate")->required();
    demo->add_option("--frames", frames, "Frame count")->required();
    demo->add_option("--out", out_dir, "Output directory")->required();
    demo->add_option("--seed", seed, "Random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*track) {
            if (!features.empty())
                ta.overrides.push_back("features=" + features);
            if (!mode.empty())
                ta.overrides.push_back("mode=" + mode);
            if (lambda >= 0.0) {
                std::ostringstream os;
                os.precision(17);
                os << lambda;
                ta.overrides.push_back("lambda_p=" + os.str());
            }
            if (parts >= -1)
                ta.overrides.push_back("parts_grid=" + std::to_string(parts));
            return cmd_track(ta);
        }
        if (*eval)
            return cmd_eval(results, eval_gt, curve);
        if (*demo)
            return cmd_demo(kind, frames, out_dir, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}
