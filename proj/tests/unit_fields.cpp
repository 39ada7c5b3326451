#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "gluon/atlas.hpp"
#include "gluon/field.hpp"
#include "gluon/interp.hpp"
#include "gluon/maps.hpp"
