# floatlab test suite
