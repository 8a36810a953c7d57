#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "grasp/rotation.hpp"

namespace grasp {

/// Exact nearest-neighbor search over a fixed 3D point set. Median-split
/// on the widest axis, leaf buckets scanned linearly.
class KdTree3 {
public:
    struct Hit {
        int index = -1;
        double distance = std::numeric_limits<double>::infinity();
    };

    explicit KdTree3(const Eigen::MatrixX3d& pts) : pts_(pts) {
        if (pts_.rows() == 0) {
            throw ValidationError("kdtree: empty point set");
        }
        order_.resize(static_cast<std::size_t>(pts_.rows()));
        std::iota(order_.begin(), order_.end(), 0);
        nodes_.reserve(static_cast<std::size_t>(2 * pts_.rows() / kLeafSize + 2));
        root_ = build(0, static_cast<int>(pts_.rows()));
    }

    Hit nearest(const Vec3& q) const {
        Hit best;
        search(root_, q, best);
        return best;
    }

    const Eigen::MatrixX3d& points() const { return pts_; }

private:
    static constexpr int kLeafSize = 8;

    struct Node {
        int begin, end;
        int axis = -1;       // -1 marks a leaf
        double split = 0.0;
        int left = -1, right = -1;
    };

    int build(int begin, int end) {
        Node node{begin, end};
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        if (end - begin <= kLeafSize) {
            return id;
        }
        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
        Vec3 hi = -lo;
        for (int i = begin; i < end; ++i) {
            const Vec3 p = pts_.row(order_[static_cast<std::size_t>(i)]).transpose();
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        int axis;
        (hi - lo).maxCoeff(&axis);
        const int mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](int a, int b) { return pts_(a, axis) < pts_(b, axis); });
        nodes_[static_cast<std::size_t>(id)].axis = axis;
        nodes_[static_cast<std::size_t>(id)].split = pts_(order_[static_cast<std::size_t>(mid)], axis);
        nodes_[static_cast<std::size_t>(id)].left = build(begin, mid);
        nodes_[static_cast<std::size_t>(id)].right = build(mid, end);
        return id;
    }

    void search(int id, const Vec3& q, Hit& best) const {
        const Node& node = nodes_[static_cast<std::size_t>(id)];
        if (node.axis < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const int idx = order_[static_cast<std::size_t>(i)];
                const double d = (pts_.row(idx).transpose() - q).norm();
                if (d < best.distance) {
                    best = {idx, d};
                }
            }
            return;
        }
        const double delta = q[node.axis] - node.split;
        const int near = delta < 0.0 ? node.left : node.right;
        const int far = delta < 0.0 ? node.right : node.left;
        search(near, q, best);
        if (std::abs(delta) < best.distance) {
            search(far, q, best);
        }
    }

    Eigen::MatrixX3d pts_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = 0;
};

}  // namespace grasp
