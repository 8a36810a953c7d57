#pragma once

#include <array>
#include <string>
#include <vector>

#include "grasp/rotation.hpp"

namespace grasp {

/// Articulated character as a pure joint tree. Index 0 is the root;
/// parents must precede children. Entry j of `rest_dirs`/`bone_lengths`
/// describes the bone parent(j) -> j; the root entries are unused.
struct Skeleton {
    std::vector<std::string> joint_names;
    std::vector<int> parents;
    std::vector<Vec3> rest_dirs;
    std::vector<double> bone_lengths;

    int joint_count() const { return static_cast<int>(joint_names.size()); }
    int bone_count() const { return joint_count() - 1; }

    /// Bone offset of joint j expressed in its parent frame.
    Vec3 bone_offset(int j) const { return bone_lengths[static_cast<std::size_t>(j)] * rest_dirs[static_cast<std::size_t>(j)]; }

    /// Bone lengths of all non-root joints in joint order (the character
    /// identity vector fed to the generator).
    Eigen::VectorXd length_vector() const {
        Eigen::VectorXd k(bone_count());
        for (int j = 1; j < joint_count(); ++j) {
            k[j - 1] = bone_lengths[static_cast<std::size_t>(j)];
        }
        return k;
    }

    int index_of(const std::string& name) const {
        for (int j = 0; j < joint_count(); ++j) {
            if (joint_names[static_cast<std::size_t>(j)] == name) {
                return j;
            }
        }
        throw ValidationError("skeleton: no joint named '" + name + "'");
    }

    void validate() const {
        const auto n = joint_names.size();
        if (n < 2) {
            throw ValidationError("skeleton: needs at least two joints");
        }
        if (parents.size() != n || rest_dirs.size() != n || bone_lengths.size() != n) {
            throw ValidationError("skeleton: field lengths disagree");
        }
        if (parents[0] != -1) {
            throw ValidationError("skeleton: joint 0 must be the root");
        }
        for (std::size_t j = 1; j < n; ++j) {
            if (parents[j] < 0 || parents[j] >= static_cast<int>(j)) {
                throw ValidationError("skeleton: parent of joint " + std::to_string(j) +
                                      " must come before it (single-rooted tree)");
            }
            if (std::abs(rest_dirs[j].norm() - 1.0) > 1e-9) {
                throw ValidationError("skeleton: rest_dir of joint " + std::to_string(j) + " is not unit length");
            }
            if (!(bone_lengths[j] > 0.0)) {
                throw ValidationError("skeleton: bone_length of joint " + std::to_string(j) + " must be positive");
            }
        }
    }
};

/// Capsule parameters of the procedural right-hand surface model.
struct HandModel {
    double finger_radius = 0.008;
    double palm_radius = 0.035;
    // Extension of the distal bone beyond the last finger joint, per
    // finger (thumb, index, middle, ring, pinky), meters.
    std::array<double, 5> tip_lengths = {0.028, 0.024, 0.026, 0.024, 0.020};
};

constexpr int kBodyJointCount = 22;   // pelvis + 21 articulated body joints
constexpr int kHandJointCount = 15;   // right hand, 5 fingers x 3 joints
constexpr int kJointCount = 37;
constexpr int kPoseDim = 225;               // 3 + 6 + 21*6 + 15*6
constexpr int kExtendedDim = kPoseDim + 3 * kJointCount;  // pose plus flattened joint positions

/// Joint roles of the canonical 37-joint skeleton, resolved by name so
/// alternative proportions load from config without code changes.
struct BodyMap {
    int pelvis = 0;
    std::array<int, 2> hip{}, knee{}, ankle{}, foot{};          // [left, right]
    std::array<int, 2> collar{}, shoulder{}, elbow{}, wrist{};  // [left, right]
    std::array<std::array<int, 3>, 5> finger{};                 // thumb..pinky, proximal..distal

    static BodyMap resolve(const Skeleton& s) {
        BodyMap m;
        m.pelvis = s.index_of("pelvis");
        const std::array<std::string, 2> side = {"left", "right"};
        for (int i = 0; i < 2; ++i) {
            m.hip[i] = s.index_of(side[i] + "_hip");
            m.knee[i] = s.index_of(side[i] + "_knee");
            m.ankle[i] = s.index_of(side[i] + "_ankle");
            m.foot[i] = s.index_of(side[i] + "_foot");
            m.collar[i] = s.index_of(side[i] + "_collar");
            m.shoulder[i] = s.index_of(side[i] + "_shoulder");
            m.elbow[i] = s.index_of(side[i] + "_elbow");
            m.wrist[i] = s.index_of(side[i] + "_wrist");
        }
        const std::array<std::string, 5> fingers = {"thumb", "index", "middle", "ring", "pinky"};
        for (int f = 0; f < 5; ++f) {
            for (int k = 0; k < 3; ++k) {
                m.finger[f][k] = s.index_of("right_" + fingers[f] + std::to_string(k + 1));
            }
        }
        return m;
    }
};

/// Default desk-scale humanoid: pelvis root, Z up, X forward, Y left.
/// Right-side bones extend along -Y; a standing root sits near z = 0.88.
inline Skeleton standard_skeleton() {
    Skeleton s;
    auto add = [&s](const std::string& name, int parent, const Vec3& dir, double len) {
        s.joint_names.push_back(name);
        s.parents.push_back(parent);
        s.rest_dirs.push_back(parent < 0 ? Vec3::Zero() : dir.normalized());
        s.bone_lengths.push_back(parent < 0 ? 0.0 : len);
    };
    add("pelvis", -1, Vec3::Zero(), 0.0);
    add("spine1", 0, {0, 0, 1}, 0.10);
    add("spine2", 1, {0, 0, 1}, 0.12);
    add("spine3", 2, {0, 0, 1}, 0.13);
    add("neck", 3, {0, 0, 1}, 0.14);
    add("head", 4, {0, 0, 1}, 0.10);
    for (int i = 0; i < 2; ++i) {
        const double sy = (i == 0) ? 1.0 : -1.0;  // left +Y, right -Y
        const std::string p = (i == 0) ? "left_" : "right_";
        add(p + "hip", 0, {0, sy * 0.966, -0.259}, 0.10);
        add(p + "knee", s.index_of(p + "hip"), {0, 0, -1}, 0.38);
        add(p + "ankle", s.index_of(p + "knee"), {0, 0, -1}, 0.40);
        add(p + "foot", s.index_of(p + "ankle"), {0.868, 0, -0.496}, 0.16);
        add(p + "collar", 3, {0, sy * 0.921, 0.390}, 0.11);
        add(p + "shoulder", s.index_of(p + "collar"), {0, sy, 0}, 0.10);
        add(p + "elbow", s.index_of(p + "shoulder"), {0, sy, 0}, 0.26);
        add(p + "wrist", s.index_of(p + "elbow"), {0, sy, 0}, 0.25);
    }
    const int rw = s.index_of("right_wrist");
    struct FingerSpec {
        const char* name;
        Vec3 dir;
        std::array<double, 3> lens;
    };
    const std::vector<FingerSpec> fingers = {
        {"thumb", {0.70, -0.60, -0.20}, {0.040, 0.035, 0.030}},
        {"index", {0.22, -0.975, 0.0}, {0.090, 0.035, 0.025}},
        {"middle", {0.0, -1.0, 0.0}, {0.095, 0.040, 0.028}},
        {"ring", {-0.18, -0.984, 0.0}, {0.088, 0.036, 0.026}},
        {"pinky", {-0.35, -0.937, 0.0}, {0.082, 0.030, 0.022}},
    };
    for (const auto& f : fingers) {
        const std::string base = "right_" + std::string(f.name);
        add(base + "1", rw, f.dir, f.lens[0]);
        add(base + "2", s.index_of(base + "1"), f.dir, f.lens[1]);
        add(base + "3", s.index_of(base + "2"), f.dir, f.lens[2]);
    }
    s.validate();
    return s;
}

}  // namespace grasp
