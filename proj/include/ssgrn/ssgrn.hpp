#ifndef SSGRN_SSGRN_HPP
#define SSGRN_SSGRN_HPP

#include "ssgrn/bootstrap.hpp"
#include "ssgrn/em.hpp"
#include "ssgrn/errors.hpp"
#include "ssgrn/kalman.hpp"
#include "ssgrn/model.hpp"
#include "ssgrn/selection.hpp"
#include "ssgrn/simulate.hpp"

#endif  // SSGRN_SSGRN_HPP
