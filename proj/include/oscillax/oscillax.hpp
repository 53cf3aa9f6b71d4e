#pragma once

#include <oscillax/bridge.hpp>
#include <oscillax/bvp.hpp>
#include <oscillax/config.hpp>
#include <oscillax/error.hpp>
#include <oscillax/expr.hpp>
#include <oscillax/function.hpp>
#include <oscillax/kernel.hpp>
#include <oscillax/lemma.hpp>
#include <oscillax/oscillation.hpp>
#include <oscillax/pipeline.hpp>
#include <oscillax/quadrature.hpp>
#include <oscillax/report.hpp>
#include <oscillax/svg.hpp>
