#pragma once

#define MEDGENIUS_VERSION "1.0.0"
