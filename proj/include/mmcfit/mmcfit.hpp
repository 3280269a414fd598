#pragma once

#include "mmcfit/adam.hpp"
#include "mmcfit/autodiff.hpp"
#include "mmcfit/camera.hpp"
#include "mmcfit/compare.hpp"
#include "mmcfit/errors.hpp"
#include "mmcfit/ik_end_to_end.hpp"
#include "mmcfit/ik_two_stage.hpp"
#include "mmcfit/io.hpp"
#include "mmcfit/kinematics.hpp"
#include "mmcfit/measures.hpp"
#include "mmcfit/mlp.hpp"
#include "mmcfit/model.hpp"
#include "mmcfit/observations.hpp"
#include "mmcfit/pipeline.hpp"
#include "mmcfit/runtime.hpp"
#include "mmcfit/synthetic.hpp"
