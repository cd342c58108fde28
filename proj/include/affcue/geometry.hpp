#pragma once

#include <Eigen/Dense>

namespace affcue {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
/// (x, y, z, roll, pitch, yaw); rotation R = Rz(yaw) * Ry(pitch) * Rx(roll).
using Pose6 = Eigen::Matrix<double, 6, 1>;

Mat3 rotation_from_rpy(double roll, double pitch, double yaw);
Vec3 rpy_from_rotation(const Mat3& r);
double wrap_angle(double a);

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform from_pose(const Pose6& pose);
  Pose6 to_pose() const;
  RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& rhs) const;
  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

inline Vec3 position_of(const Pose6& p) { return p.head<3>(); }

}  // namespace affcue
