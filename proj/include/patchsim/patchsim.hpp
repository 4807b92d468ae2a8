#pragma once

#include "patchsim/adam.hpp"
#include "patchsim/checkpoint.hpp"
#include "patchsim/config.hpp"
#include "patchsim/conv.hpp"
#include "patchsim/data.hpp"
#include "patchsim/dp.hpp"
#include "patchsim/embedding.hpp"
#include "patchsim/errors.hpp"
#include "patchsim/eval.hpp"
#include "patchsim/image.hpp"
#include "patchsim/losses.hpp"
#include "patchsim/match_path.hpp"
#include "patchsim/png_io.hpp"
#include "patchsim/rng.hpp"
#include "patchsim/similarity.hpp"
#include "patchsim/synthetic.hpp"
#include "patchsim/tensor.hpp"
#include "patchsim/train.hpp"
