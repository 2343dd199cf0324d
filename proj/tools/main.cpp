#include <iostream>

int main() {
    std::cout << "phykan cli placeholder\n";
    return 0;
}
