#pragma once

#include "useq/controlled.hpp"
#include "useq/convert.hpp"
#include "useq/errors.hpp"
#include "useq/evaluate.hpp"
#include "useq/gallery.hpp"
#include "useq/linalg.hpp"
#include "useq/models.hpp"
#include "useq/oracle.hpp"
