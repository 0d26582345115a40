#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kinemesh/articulation.hpp"

namespace kinemesh {

struct UrdfLink {
    std::string name;
    std::string mesh;                    // filename used by both visual and collision
    Vec3 mesh_origin = Vec3::Zero();     // meters, in the link frame
};

struct UrdfJoint {
    std::string name;
    std::string type;  // revolute, prismatic or fixed
    std::string parent;
    std::string child;
    Vec3 origin = Vec3::Zero();  // meters, in the parent frame
    Vec3 axis = Vec3::UnitZ();
    double lower = 0.0;  // radians or meters
    double upper = 0.0;
    double effort = 100.0;
    double velocity = 1.0;
};

struct UrdfModel {
    std::string name = "object";
    std::vector<UrdfLink> links;
    std::vector<UrdfJoint> joints;

    // Link names unique, every non-root link the child of exactly one joint,
    // one root, unit axes on moving joints. Throws Error("invalid-urdf").
    void validate() const;
};

struct UrdfOptions {
    std::string name = "object";
    double units_to_meters = 1.0;
    double limit_padding = 0.1;  // fraction of the recovered motion added at both ends
    std::string mesh_dir = "meshes";
};

// Part k becomes link part_k; every movable part hangs off part_0.
// Revolute origin = pivot, prismatic origin = part centroid; child meshes
// keep state-t1 world coordinates through a compensating visual origin.
UrdfModel build_urdf(const PartAwareMesh& mesh, const JointParams& joints, const UrdfOptions& options = {});

// Writes <out_dir>/<name>.urdf and one OBJ (meters) per part.
UrdfModel export_urdf(const PartAwareMesh& mesh, const JointParams& joints, const std::filesystem::path& out_dir,
                      const UrdfOptions& options = {});

std::string urdf_to_xml(const UrdfModel& model);
// Parses and checks element/attribute names against the URDF schema.
UrdfModel parse_urdf(const std::string& xml);

}  // namespace kinemesh
