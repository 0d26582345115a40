#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "kinemesh/error.hpp"
#include "kinemesh/io.hpp"
#include "kinemesh/synth.hpp"
#include "kinemesh/urdf.hpp"
#include "test_util.hpp"

namespace kinemesh {
namespace {

using testing::ScratchDir;

Scene scene_of(SceneTemplate t, unsigned seed = 1) {
    SceneSpec s;
    s.tmpl = t;
    s.seed = seed;
    s.image_size = 8;
    s.train_views = 1;
    s.test_views = 0;
    return generate_scene(s);
}

JointParams typed(const GroundTruth& gt) {
    JointParams p = gt.joint_params();
    for (const JointTruth& j : gt.joints) p.parts[static_cast<size_t>(j.part)].type = j.type;
    return p;
}

void expect_models_match(const UrdfModel& a, const UrdfModel& b, double tol) {
    ASSERT_EQ(a.links.size(), b.links.size());
    ASSERT_EQ(a.joints.size(), b.joints.size());
    for (size_t i = 0; i < a.links.size(); ++i) {
        EXPECT_EQ(a.links[i].name, b.links[i].name);
        EXPECT_EQ(a.links[i].mesh, b.links[i].mesh);
        EXPECT_LE((a.links[i].mesh_origin - b.links[i].mesh_origin).norm(), tol);
    }
    for (size_t i = 0; i < a.joints.size(); ++i) {
        const UrdfJoint &x = a.joints[i], &y = b.joints[i];
        EXPECT_EQ(x.name, y.name);
        EXPECT_EQ(x.type, y.type);
        EXPECT_EQ(x.parent, y.parent);
        EXPECT_EQ(x.child, y.child);
        EXPECT_LE((x.origin - y.origin).norm(), tol);
        if (x.type != "fixed") EXPECT_LE((x.axis - y.axis).norm(), tol);
        EXPECT_NEAR(x.lower, y.lower, tol);
        EXPECT_NEAR(x.upper, y.upper, tol);
    }
}

TEST(Urdf, HingeHasOneRevoluteJointFromGroundTruth) {
    const Scene sc = scene_of(SceneTemplate::HingedBox);
    const UrdfModel m = build_urdf(sc.gt.mesh[0], typed(sc.gt));
    ASSERT_EQ(m.links.size(), 2u);
    ASSERT_EQ(m.joints.size(), 1u);
    const UrdfJoint& j = m.joints[0];
    const JointTruth& t = sc.gt.joints[0];
    EXPECT_EQ(j.type, "revolute");
    EXPECT_EQ(j.parent, "part_0");
    EXPECT_EQ(j.child, "part_1");
    // axis oriented along the actual motion, angle = |motion|
    const Vec3 axis = t.motion() < 0.0 ? Vec3(-t.axis) : t.axis;
    const double angle = std::abs(t.motion()) * std::numbers::pi / 180.0;
    EXPECT_LT((j.axis - axis).norm(), 1e-9);
    EXPECT_LT((j.origin - t.pivot).norm(), 1e-9);
    EXPECT_NEAR(j.lower, -0.1 * angle, 1e-9);
    EXPECT_NEAR(j.upper, 1.1 * angle, 1e-9);
    EXPECT_EQ(m.links[1].mesh_origin, -j.origin);
}

TEST(Urdf, PrismaticOriginIsPartCentroidInMeters) {
    const Scene sc = scene_of(SceneTemplate::DrawerCabinet);
    UrdfOptions opt;
    opt.units_to_meters = 0.5;
    const UrdfModel m = build_urdf(sc.gt.mesh[0], typed(sc.gt), opt);
    ASSERT_EQ(m.joints.size(), 1u);
    const UrdfJoint& j = m.joints[0];
    const JointTruth& t = sc.gt.joints[0];
    EXPECT_EQ(j.type, "prismatic");
    // centroid of the distinct vertices referenced by part-1 faces
    const PartAwareMesh& mesh = sc.gt.mesh[0];
    std::vector<char> used(mesh.vertex_count(), 0);
    for (int f : mesh.part_faces[1])
        for (int c = 0; c < 3; ++c) used[static_cast<size_t>(mesh.faces[static_cast<size_t>(f)][c])] = 1;
    Vec3 sum = Vec3::Zero();
    int n = 0;
    for (size_t i = 0; i < used.size(); ++i)
        if (used[i]) {
            sum += mesh.positions[i];
            ++n;
        }
    EXPECT_LT((j.origin - 0.5 * sum / n).norm(), 1e-12);
    const Vec3 axis = t.motion() < 0.0 ? Vec3(-t.axis) : t.axis;
    EXPECT_LT((j.axis - axis).norm(), 1e-9);
    EXPECT_NEAR(j.upper, 1.1 * 0.5 * std::abs(t.motion()), 1e-12);
    EXPECT_NEAR(j.lower, -0.1 * 0.5 * std::abs(t.motion()), 1e-12);
}

TEST(Urdf, SingleLinkWhenThereAreNoMovableParts) {
    std::vector<Vec3> pos;
    std::vector<Triangle> faces;
    testing::append_box(pos, faces, Vec3::Zero(), Vec3::Ones());
    const PartAwareMesh m = harden_parts(testing::make_mesh(pos, faces, 1, std::vector<int>(pos.size(), 0)));
    const UrdfModel u = build_urdf(m, JointParams::identity(1));
    EXPECT_EQ(u.links.size(), 1u);
    EXPECT_TRUE(u.joints.empty());
    const UrdfModel back = parse_urdf(urdf_to_xml(u));
    EXPECT_EQ(back.links.size(), 1u);
    EXPECT_TRUE(back.joints.empty());
}

TEST(Urdf, StaticPartBecomesFixedJoint) {
    const Scene sc = scene_of(SceneTemplate::HingedBox);
    JointParams p = JointParams::identity(2);
    p.parts[1].type = JointType::Static;
    const UrdfModel u = build_urdf(sc.gt.mesh[0], p);
    ASSERT_EQ(u.joints.size(), 1u);
    EXPECT_EQ(u.joints[0].type, "fixed");
    const std::string xml = urdf_to_xml(u);
    EXPECT_EQ(xml.find("<limit"), std::string::npos);
    expect_models_match(parse_urdf(xml), u, 0.0);
}

TEST(Urdf, Errors) {
    const Scene sc = scene_of(SceneTemplate::HingedBox);
    auto code_of = [&](const PartAwareMesh& m, const JointParams& j) {
        try {
            build_urdf(m, j);
        } catch (const Error& e) {
            return e.code();
        }
        return std::string("none");
    };
    JointParams untyped = sc.gt.joint_params();
    untyped.parts[1].type = JointType::Undecided;
    EXPECT_EQ(code_of(sc.gt.mesh[0], untyped), "untyped-joint");
    EXPECT_EQ(code_of(sc.gt.mesh[0], JointParams::identity(3)), "joint-count-mismatch");
    PartAwareMesh emptied = sc.gt.mesh[0];
    emptied.part_faces[1].clear();
    EXPECT_EQ(code_of(emptied, typed(sc.gt)), "empty-part");
}

TEST(Urdf, ExportWritesMeshesAndRoundTripsOnEveryTemplate) {
    for (SceneTemplate t : {SceneTemplate::HingedBox, SceneTemplate::DrawerCabinet, SceneTemplate::MultiDrawer,
                            SceneTemplate::DoorDrawer}) {
        ScratchDir dir("urdf");
        const Scene sc = scene_of(t, 5);
        UrdfOptions opt;
        opt.name = to_string(t);
        opt.units_to_meters = 0.25;
        const UrdfModel m = export_urdf(sc.gt.mesh[0], typed(sc.gt), dir.path(), opt);
        const UrdfModel back = parse_urdf(read_text_file(dir / (opt.name + ".urdf")));
        EXPECT_EQ(back.name, opt.name);
        expect_models_match(back, m, 1e-9);
        EXPECT_EQ(m.joints.size(), sc.gt.joints.size());
        for (int k = 0; k < sc.gt.num_parts; ++k) {
            std::vector<Vec3> pts, ref;
            std::vector<Triangle> tris, ref_tris;
            load_obj(dir / m.links[static_cast<size_t>(k)].mesh, pts, tris);
            sc.gt.mesh[0].extract_part(k, ref, ref_tris);
            ASSERT_EQ(pts.size(), ref.size());
            EXPECT_EQ(tris, ref_tris);
            for (size_t i = 0; i < pts.size(); ++i) EXPECT_LT((pts[i] - 0.25 * ref[i]).norm(), 1e-15);
        }
    }
}

std::string minimal(const std::string& joint_body, const std::string& extra = "") {
    return "<robot name=\"r\"><link name=\"a\"/><link name=\"b\"/>" + extra +
           "<joint name=\"j\" type=\"revolute\"><parent link=\"a\"/><child link=\"b\"/>" + joint_body +
           "</joint></robot>";
}

TEST(UrdfSchema, AcceptsMinimalDocument) {
    const UrdfModel m = parse_urdf(minimal("<axis xyz=\"0 1 0\"/><limit lower=\"-1\" upper=\"2\" effort=\"1\" velocity=\"1\"/>"));
    ASSERT_EQ(m.joints.size(), 1u);
    EXPECT_EQ(m.joints[0].axis, Vec3(0, 1, 0));
    EXPECT_EQ(m.joints[0].upper, 2.0);
}

TEST(UrdfSchema, RejectsInvalidDocuments) {
    const std::string limit = "<limit lower=\"0\" upper=\"1\" effort=\"1\" velocity=\"1\"/>";
    const std::vector<std::string> bad{
        minimal("<axis xyz=\"0 0 1\"/>"),                                            // revolute without limit
        minimal("<axis xyz=\"0 0 1\"/><limit lower=\"0\" upper=\"1\"/>"),            // limit lacks effort
        minimal("<axis xyz=\"0 0 1\"/>" + limit + "<spring k=\"1\"/>"),              // unknown element
        minimal("<axis xyz=\"0 0 1\" rpy=\"0 0 0\"/>" + limit),                      // unknown attribute
        minimal("<axis xyz=\"0 0 2\"/>" + limit),                                    // axis not unit
        minimal("<axis xyz=\"0 0\"/>" + limit),                                      // short vector
        minimal("<axis xyz=\"0 0 1\"/>" + limit, "<link name=\"c\"/>"),              // two roots
        minimal("<axis xyz=\"0 0 1\"/>" + limit, "<link name=\"a\"/>"),              // duplicate link
        "<robot name=\"r\"><link name=\"a\"><visual><geometry/></visual></link></robot>",  // empty geometry
        "<robot><link name=\"a\"/></robot>",                                         // robot without name
        "<robot name=\"r\"><link name=\"a\">",                                       // malformed
        "<model name=\"r\"/>",                                                       // wrong root
    };
    for (const std::string& xml : bad) {
        try {
            parse_urdf(xml);
            ADD_FAILURE() << "accepted: " << xml;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), "invalid-urdf") << xml;
        }
    }
}

}  // namespace
}  // namespace kinemesh
