# Lab models package
