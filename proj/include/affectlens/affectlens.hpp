#pragma once

#include "affectlens/aggregate.hpp"
#include "affectlens/attn_diff.hpp"
#include "affectlens/attn_features.hpp"
#include "affectlens/emotion.hpp"
#include "affectlens/error.hpp"
#include "affectlens/feature_csv.hpp"
#include "affectlens/latent_space.hpp"
#include "affectlens/npy.hpp"
#include "affectlens/parallel.hpp"
#include "affectlens/rng.hpp"
#include "affectlens/segmenter.hpp"
#include "affectlens/stats/cv.hpp"
#include "affectlens/stats/effect_size.hpp"
#include "affectlens/stats/forest.hpp"
#include "affectlens/stats/kfold.hpp"
#include "affectlens/stats/logistic.hpp"
#include "affectlens/stats/matrix.hpp"
#include "affectlens/stats/metrics.hpp"
#include "affectlens/stats/roc.hpp"
#include "affectlens/stats/standardize.hpp"
#include "affectlens/svg_heatmap.hpp"
#include "affectlens/synthetic.hpp"
#include "affectlens/tensor.hpp"
#include "affectlens/tensor_store.hpp"
