// Convenience umbrella for the whole library.
#pragma once

#include "wunet/autodiff.hpp"
#include "wunet/baseline.hpp"
#include "wunet/checkpoint.hpp"
#include "wunet/config.hpp"
#include "wunet/core.hpp"
#include "wunet/dataset.hpp"
#include "wunet/experiment.hpp"
#include "wunet/fusion.hpp"
#include "wunet/image_io.hpp"
#include "wunet/imageops.hpp"
#include "wunet/metrics.hpp"
#include "wunet/model.hpp"
#include "wunet/optim.hpp"
#include "wunet/pca.hpp"
#include "wunet/rng.hpp"
#include "wunet/selftest.hpp"
#include "wunet/synth.hpp"
#include "wunet/train.hpp"
#include "wunet/wavelet.hpp"
