#pragma once

#include <filesystem>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "grasp/foot_refine.hpp"
#include "grasp/generator.hpp"
#include "grasp/hand_refine.hpp"
#include "grasp/metrics.hpp"
#include "grasp/point_cloud.hpp"

namespace grasp::io {

using nlohmann::json;

/// Raised for malformed files; the message names the offending field.
class FileFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw FileFormatError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FileFormatError(path.string() + ": " + e.what());
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FileFormatError("cannot write " + path.string());
    }
    out << text;
}

inline void check_header(const json& j, const std::string& format, const std::string& what) {
    if (!j.contains("format") || j["format"] != format) {
        throw FileFormatError(what + ": missing or wrong format tag (expected '" + format + "')");
    }
    if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != 1) {
        throw FileFormatError(what + ": unsupported version (expected 1)");
    }
}

/// Strict object access: every listed key must exist, nothing else may.
inline void check_fields(const json& j, std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional, const std::string& what) {
    for (const char* key : required) {
        if (!j.contains(key)) {
            throw FileFormatError(what + ": missing field '" + key + "'");
        }
    }
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* k : required) {
            known = known || key == k;
        }
        for (const char* k : optional) {
            known = known || key == k;
        }
        if (!known) {
            throw FileFormatError(what + ": unknown field '" + key + "'");
        }
    }
}

template <int N>
Eigen::Matrix<double, N, 1> to_vec(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != N) {
        throw FileFormatError(what + ": expected an array of " + std::to_string(N) + " numbers");
    }
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) {
        v[i] = j[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
}

template <typename Derived>
json from_vec(const Eigen::MatrixBase<Derived>& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        arr.push_back(v[i]);
    }
    return arr;
}

}  // namespace detail

// --------------------------------------------------------------------------
// Skeleton files

inline json skeleton_to_json(const Skeleton& s, const HandModel& hand) {
    json joints = json::array();
    for (int j = 0; j < s.joint_count(); ++j) {
        json rec;
        rec["name"] = s.joint_names[static_cast<std::size_t>(j)];
        rec["parent"] = s.parents[static_cast<std::size_t>(j)];
        if (j > 0) {
            rec["dir"] = detail::from_vec(s.rest_dirs[static_cast<std::size_t>(j)]);
            rec["length"] = s.bone_lengths[static_cast<std::size_t>(j)];
        }
        joints.push_back(rec);
    }
    json hand_j;
    hand_j["finger_radius"] = hand.finger_radius;
    hand_j["palm_radius"] = hand.palm_radius;
    hand_j["tip_lengths"] = json::array();
    for (double t : hand.tip_lengths) {
        hand_j["tip_lengths"].push_back(t);
    }
    return json{{"format", "grasp-skeleton"}, {"version", 1}, {"joints", joints}, {"hand", hand_j}};
}

inline std::pair<Skeleton, HandModel> skeleton_from_json(const json& j) {
    detail::check_header(j, "grasp-skeleton", "skeleton");
    detail::check_fields(j, {"format", "version", "joints"}, {"hand"}, "skeleton");
    Skeleton s;
    for (const auto& rec : j.at("joints")) {
        detail::check_fields(rec, {"name", "parent"}, {"dir", "length"}, "skeleton joint");
        s.joint_names.push_back(rec.at("name").get<std::string>());
        s.parents.push_back(rec.at("parent").get<int>());
        if (s.parents.back() < 0) {
            s.rest_dirs.push_back(Vec3::Zero());
            s.bone_lengths.push_back(0.0);
        } else {
            s.rest_dirs.push_back(detail::to_vec<3>(rec.at("dir"), "skeleton joint dir"));
            s.bone_lengths.push_back(rec.at("length").get<double>());
        }
    }
    s.validate();
    HandModel hand;
    if (j.contains("hand")) {
        const json& h = j.at("hand");
        detail::check_fields(h, {"finger_radius", "palm_radius", "tip_lengths"}, {}, "skeleton hand");
        hand.finger_radius = h.at("finger_radius").get<double>();
        hand.palm_radius = h.at("palm_radius").get<double>();
        const auto tips = h.at("tip_lengths");
        if (tips.size() != 5) {
            throw FileFormatError("skeleton hand: tip_lengths must have 5 entries");
        }
        for (int i = 0; i < 5; ++i) {
            hand.tip_lengths[static_cast<std::size_t>(i)] = tips[static_cast<std::size_t>(i)].get<double>();
        }
    }
    return {s, hand};
}

inline void save_skeleton(const std::filesystem::path& path, const Skeleton& s, const HandModel& hand = {}) {
    detail::write_text(path, skeleton_to_json(s, hand).dump(2) + "\n");
}

inline std::pair<Skeleton, HandModel> load_skeleton(const std::filesystem::path& path) {
    return skeleton_from_json(detail::read_json(path));
}

// --------------------------------------------------------------------------
// Motion files

inline json motion_to_json(const MotionSequence& seq) {
    json frames = json::array();
    for (const Pose& p : seq.frames) {
        json f;
        f["t"] = detail::from_vec(p.t());
        f["phi"] = detail::from_vec(p.phi());
        json body = json::array();
        for (int jnt = 0; jnt < kBodyJointCount - 1; ++jnt) {
            body.push_back(detail::from_vec(p.body(jnt)));
        }
        json rhand = json::array();
        for (int jnt = 0; jnt < kHandJointCount; ++jnt) {
            rhand.push_back(detail::from_vec(p.hand(jnt)));
        }
        f["body"] = body;
        f["rhand"] = rhand;
        frames.push_back(f);
    }
    json j{{"format", "grasp-motion"}, {"version", 1}, {"fps", seq.fps}, {"frames", frames}};
    if (seq.contact_probs) {
        json contact = json::array();
        for (const Vec2& c : *seq.contact_probs) {
            contact.push_back(detail::from_vec(c));
        }
        j["contact"] = contact;
    }
    return j;
}

inline MotionSequence motion_from_json(const json& j) {
    detail::check_header(j, "grasp-motion", "motion");
    detail::check_fields(j, {"format", "version", "fps", "frames"}, {"contact"}, "motion");
    MotionSequence seq;
    seq.fps = j.at("fps").get<double>();
    for (const auto& f : j.at("frames")) {
        detail::check_fields(f, {"t", "phi", "body", "rhand"}, {}, "motion frame");
        Pose p;
        p.t() = detail::to_vec<3>(f.at("t"), "frame t");
        p.phi() = detail::to_vec<6>(f.at("phi"), "frame phi");
        if (f.at("body").size() != kBodyJointCount - 1) {
            throw FileFormatError("motion frame: body must hold 21 rotation blocks");
        }
        if (f.at("rhand").size() != kHandJointCount) {
            throw FileFormatError("motion frame: rhand must hold 15 rotation blocks");
        }
        for (int jnt = 0; jnt < kBodyJointCount - 1; ++jnt) {
            p.body(jnt) = detail::to_vec<6>(f.at("body")[static_cast<std::size_t>(jnt)], "frame body block");
        }
        for (int jnt = 0; jnt < kHandJointCount; ++jnt) {
            p.hand(jnt) = detail::to_vec<6>(f.at("rhand")[static_cast<std::size_t>(jnt)], "frame rhand block");
        }
        seq.frames.push_back(p);
    }
    if (j.contains("contact")) {
        std::vector<Vec2> contact;
        for (const auto& c : j.at("contact")) {
            contact.push_back(detail::to_vec<2>(c, "contact entry"));
        }
        seq.contact_probs = std::move(contact);
    }
    seq.validate();
    return seq;
}

inline void save_motion(const std::filesystem::path& path, const MotionSequence& seq) {
    detail::write_text(path, motion_to_json(seq).dump() + "\n");
}

inline MotionSequence load_motion(const std::filesystem::path& path) {
    return motion_from_json(detail::read_json(path));
}

// --------------------------------------------------------------------------
// Point cloud files: one "x y z nx ny nz" record per line, meters

inline void save_cloud(const std::filesystem::path& path, const ObjectCloud& cloud) {
    cloud.validate();
    std::ostringstream out;
    out.precision(17);
    for (Eigen::Index i = 0; i < cloud.points.rows(); ++i) {
        out << cloud.points(i, 0) << ' ' << cloud.points(i, 1) << ' ' << cloud.points(i, 2) << ' '
            << cloud.normals(i, 0) << ' ' << cloud.normals(i, 1) << ' ' << cloud.normals(i, 2) << '\n';
    }
    detail::write_text(path, out.str());
}

inline ObjectCloud load_cloud(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw FileFormatError("cannot open " + path.string());
    }
    std::vector<std::array<double, 6>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::istringstream ls(line);
        std::array<double, 6> rec{};
        for (double& v : rec) {
            if (!(ls >> v)) {
                throw FileFormatError(path.string() + ":" + std::to_string(line_no) +
                                      ": expected 6 numbers (x y z nx ny nz)");
            }
        }
        rows.push_back(rec);
    }
    if (static_cast<int>(rows.size()) != ObjectCloud::kPointCount) {
        throw FileFormatError(path.string() + ": expected 4096 points, found " + std::to_string(rows.size()));
    }
    ObjectCloud cloud;
    cloud.points.resize(static_cast<Eigen::Index>(rows.size()), 3);
    cloud.normals.resize(static_cast<Eigen::Index>(rows.size()), 3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        cloud.points.row(static_cast<Eigen::Index>(i)) << rows[i][0], rows[i][1], rows[i][2];
        Vec3 n(rows[i][3], rows[i][4], rows[i][5]);
        if (std::abs(n.norm() - 1.0) > 1e-4) {
            throw FileFormatError(path.string() + ":" + std::to_string(i + 1) + ": normal is not unit length");
        }
        cloud.normals.row(static_cast<Eigen::Index>(i)) = n.normalized().transpose();
    }
    cloud.validate();
    return cloud;
}

// --------------------------------------------------------------------------
// Pipeline configuration

struct PipelineConfig {
    GeneratorConfig generator;
    double contact_threshold = 0.5;
    RefineConfig hand;
    double voxel_step = 0.005;
    bool skating_mean = true;
    double fps = 30.0;

    void validate() const {
        generator.validate();
        hand.validate();
        if (contact_threshold < 0.0 || contact_threshold > 1.0) {
            throw ValidationError("config: contact threshold must lie in [0,1]");
        }
        if (!(voxel_step > 0.0) || !(fps > 0.0)) {
            throw ValidationError("config: voxel step and fps must be positive");
        }
    }
};

inline json generator_config_to_json(const GeneratorConfig& g) {
    const LossWeights& w = g.loss_weights;
    return json{{"layers", g.layers},
                {"model_dim", g.model_dim},
                {"heads", g.heads},
                {"T", g.seq_len},
                {"learning_rate", g.learning_rate},
                {"train_steps", g.train_steps},
                {"loss_weights",
                 json{{"t", w.t},
                      {"rg", w.rg},
                      {"rb", w.rb},
                      {"rh", w.rh},
                      {"fc", w.fc},
                      {"w2", w.w2},
                      {"w3", w.w3},
                      {"w4", w.w4}}}};
}

inline GeneratorConfig generator_config_from_json(const json& j) {
    detail::check_fields(j, {"layers", "model_dim", "heads", "T", "learning_rate", "train_steps", "loss_weights"},
                         {}, "config generator");
    GeneratorConfig g;
    g.layers = j.at("layers").get<int>();
    g.model_dim = j.at("model_dim").get<int>();
    g.heads = j.at("heads").get<int>();
    g.seq_len = j.at("T").get<int>();
    g.learning_rate = j.at("learning_rate").get<double>();
    g.train_steps = j.at("train_steps").get<int>();
    const json& w = j.at("loss_weights");
    detail::check_fields(w, {"t", "rg", "rb", "rh", "fc", "w2", "w3", "w4"}, {}, "config loss_weights");
    g.loss_weights = {w.at("t").get<double>(),  w.at("rg").get<double>(), w.at("rb").get<double>(),
                      w.at("rh").get<double>(), w.at("fc").get<double>(), w.at("w2").get<double>(),
                      w.at("w3").get<double>(), w.at("w4").get<double>()};
    g.validate();
    return g;
}

inline json config_to_json(const PipelineConfig& c) {
    const RefineConfig& h = c.hand;
    json hand{{"alpha1", h.alpha1},
              {"alpha2", h.alpha2},
              {"alpha3", h.alpha3},
              {"alpha4", h.alpha4},
              {"alpha5", h.alpha5},
              {"delta", h.delta},
              {"delta2", h.delta2},
              {"L", h.last_frames},
              {"iterations", h.iterations},
              {"step_size", h.step_size},
              {"wrist_radius", h.wrist_radius},
              {"cone_half_angle", h.cone_half_angle},
              {"flip_speed_penalty", h.flip_speed_penalty}};
    return json{{"format", "grasp-config"},
                {"version", 1},
                {"fps", c.fps},
                {"generator", generator_config_to_json(c.generator)},
                {"foot", json{{"contact_threshold", c.contact_threshold}}},
                {"hand", hand},
                {"metrics", json{{"voxel_step", c.voxel_step}, {"skating_mean", c.skating_mean}}}};
}

inline PipelineConfig config_from_json(const json& j) {
    detail::check_header(j, "grasp-config", "config");
    detail::check_fields(j, {"format", "version", "fps", "generator", "foot", "hand", "metrics"}, {}, "config");
    PipelineConfig c;
    c.fps = j.at("fps").get<double>();
    c.generator = generator_config_from_json(j.at("generator"));
    detail::check_fields(j.at("foot"), {"contact_threshold"}, {}, "config foot");
    c.contact_threshold = j.at("foot").at("contact_threshold").get<double>();
    const json& h = j.at("hand");
    detail::check_fields(h,
                         {"alpha1", "alpha2", "alpha3", "alpha4", "alpha5", "delta", "delta2", "L", "iterations",
                          "step_size", "wrist_radius", "cone_half_angle", "flip_speed_penalty"},
                         {}, "config hand");
    c.hand.alpha1 = h.at("alpha1").get<double>();
    c.hand.alpha2 = h.at("alpha2").get<double>();
    c.hand.alpha3 = h.at("alpha3").get<double>();
    c.hand.alpha4 = h.at("alpha4").get<double>();
    c.hand.alpha5 = h.at("alpha5").get<double>();
    c.hand.delta = h.at("delta").get<double>();
    c.hand.delta2 = h.at("delta2").get<double>();
    c.hand.last_frames = h.at("L").get<int>();
    c.hand.iterations = h.at("iterations").get<int>();
    c.hand.step_size = h.at("step_size").get<double>();
    c.hand.wrist_radius = h.at("wrist_radius").get<double>();
    c.hand.cone_half_angle = h.at("cone_half_angle").get<double>();
    c.hand.flip_speed_penalty = h.at("flip_speed_penalty").get<bool>();
    detail::check_fields(j.at("metrics"), {"voxel_step", "skating_mean"}, {}, "config metrics");
    c.voxel_step = j.at("metrics").at("voxel_step").get<double>();
    c.skating_mean = j.at("metrics").at("skating_mean").get<bool>();
    c.validate();
    return c;
}

inline void save_config(const std::filesystem::path& path, const PipelineConfig& c) {
    detail::write_text(path, config_to_json(c).dump(2) + "\n");
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    return config_from_json(detail::read_json(path));
}

// --------------------------------------------------------------------------
// Weight checkpoints: magic, config JSON, then named row-major tensors

inline void save_weights(const std::filesystem::path& path, GeneratorNet& net) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw FileFormatError("cannot write " + path.string());
    }
    const auto write_u32 = [&out](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    out.write("GMWT", 4);
    write_u32(1);
    json header = generator_config_to_json(net.config());
    header["skeleton_dim"] = net.skeleton_dim();
    const std::string cfg = header.dump();
    write_u32(static_cast<uint32_t>(cfg.size()));
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    auto params = net.parameters();
    write_u32(static_cast<uint32_t>(params.size()));
    for (const auto& p : params) {
        write_u32(static_cast<uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        const uint64_t rows = static_cast<uint64_t>(p.value->rows());
        const uint64_t cols = static_cast<uint64_t>(p.value->cols());
        out.write(reinterpret_cast<const char*>(&rows), 8);
        out.write(reinterpret_cast<const char*>(&cols), 8);
        for (Eigen::Index r = 0; r < p.value->rows(); ++r) {
            for (Eigen::Index c = 0; c < p.value->cols(); ++c) {
                const double v = (*p.value)(r, c);
                out.write(reinterpret_cast<const char*>(&v), 8);
            }
        }
    }
}

inline GeneratorNet load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FileFormatError("cannot open " + path.string());
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "GMWT") {
        throw FileFormatError(path.string() + ": not a weight checkpoint");
    }
    const auto read_u32 = [&in, &path]() {
        uint32_t v;
        in.read(reinterpret_cast<char*>(&v), 4);
        if (!in) {
            throw FileFormatError(path.string() + ": truncated checkpoint");
        }
        return v;
    };
    const uint32_t version = read_u32();
    if (version != 1) {
        throw FileFormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    }
    const uint32_t cfg_len = read_u32();
    std::string cfg_text(cfg_len, '\0');
    in.read(cfg_text.data(), cfg_len);
    json header = json::parse(cfg_text);
    const int skeleton_dim = header.at("skeleton_dim").get<int>();
    header.erase("skeleton_dim");
    const GeneratorConfig cfg = generator_config_from_json(header);

    GeneratorNet net(cfg, skeleton_dim, 0);
    auto params = net.parameters();
    const uint32_t count = read_u32();
    if (count != params.size()) {
        throw FileFormatError(path.string() + ": tensor count mismatch");
    }
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = read_u32();
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        uint64_t rows, cols;
        in.read(reinterpret_cast<char*>(&rows), 8);
        in.read(reinterpret_cast<char*>(&cols), 8);
        nn::ParamRef* ref = nullptr;
        for (auto& p : params) {
            if (p.name == name) {
                ref = &p;
                break;
            }
        }
        if (ref == nullptr) {
            throw FileFormatError(path.string() + ": unknown tensor '" + name + "'");
        }
        if (static_cast<uint64_t>(ref->value->rows()) != rows || static_cast<uint64_t>(ref->value->cols()) != cols) {
            throw FileFormatError(path.string() + ": tensor '" + name + "' has unexpected shape");
        }
        for (uint64_t r = 0; r < rows; ++r) {
            for (uint64_t c = 0; c < cols; ++c) {
                double v;
                in.read(reinterpret_cast<char*>(&v), 8);
                (*ref->value)(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
            }
        }
        if (!in) {
            throw FileFormatError(path.string() + ": truncated checkpoint");
        }
    }
    return net;
}

/// Loss trace as delimited text: step, L1, L2, L3, L4, total.
inline void save_trace(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
    std::ostringstream out;
    out.precision(17);
    out << "step,l1,l2,l3,l4,total\n";
    for (const auto& row : trace) {
        out << row.step << ',' << row.l1 << ',' << row.l2 << ',' << row.l3 << ',' << row.l4 << ',' << row.total
            << '\n';
    }
    detail::write_text(path, out.str());
}

inline json metrics_to_json(const MetricsReport& m) {
    return json{{"end_mjd_body_mm", m.end_mjd_body_mm},
                {"end_mjd_rhand_mm", m.end_mjd_rhand_mm},
                {"pskl_pred_gt", m.pskl_pred_gt},
                {"pskl_gt_pred", m.pskl_gt_pred},
                {"inter_v1_cm3", m.inter_v1_cm3},
                {"inter_v5_cm3", m.inter_v5_cm3},
                {"inter_v10_cm3", m.inter_v10_cm3},
                {"skating_cm_per_s", m.skating_cm_per_s},
                {"wall_time_s", m.wall_time_s}};
}

}  // namespace grasp::io
