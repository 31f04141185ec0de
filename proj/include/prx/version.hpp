#pragma once

#define PRX_VERSION "0.1.0"
