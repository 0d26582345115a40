#pragma once

#include "kinemesh/camera.hpp"
#include "kinemesh/image.hpp"

namespace kinemesh {

// One observation: camera plus ground-truth RGB, depth (0 = invalid) and
// part labels (-1 = background).
struct CameraView {
    PinholeCamera camera;
    Image rgb;
    Image depth;
    LabelMap labels;
    int state = 0;
};

}  // namespace kinemesh
