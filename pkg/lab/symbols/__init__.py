# Symbol families package
