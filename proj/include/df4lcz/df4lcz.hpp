#pragma once

#include "df4lcz/errors.hpp"
#include "df4lcz/nn/tensor.hpp"
#include "df4lcz/nn/rng.hpp"
#include "df4lcz/nn/params.hpp"
#include "df4lcz/nn/layers.hpp"
#include "df4lcz/nn/gradcheck.hpp"
#include "df4lcz/graph/instances.hpp"
#include "df4lcz/graph/scene_graph.hpp"
#include "df4lcz/graph/gcn.hpp"
#include "df4lcz/spectral/conv3d.hpp"
#include "df4lcz/spectral/resnet3d.hpp"
#include "df4lcz/fusion/prob_vector.hpp"
#include "df4lcz/fusion/fuse.hpp"
#include "df4lcz/fusion/metrics.hpp"
#include "df4lcz/fusion/sweep.hpp"
#include "df4lcz/fusion/report.hpp"
#include "df4lcz/data/lczt.hpp"
#include "df4lcz/data/sentinel.hpp"
#include "df4lcz/data/manifest.hpp"
#include "df4lcz/data/polygons.hpp"
#include "df4lcz/data/split.hpp"
#include "df4lcz/data/augment.hpp"
#include "df4lcz/data/extract.hpp"
#include "df4lcz/data/dataset.hpp"
#include "df4lcz/data/synth.hpp"
#include "df4lcz/train/checkpoint.hpp"
#include "df4lcz/train/trainer.hpp"
#include "df4lcz/train/two_phase.hpp"
#include "df4lcz/gradcheck_suite.hpp"
