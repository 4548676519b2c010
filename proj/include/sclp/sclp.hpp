#pragma once

#include "sclp/pipeline.hpp"
#include "sclp/synthetic.hpp"
#include "sclp/report.hpp"
